#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "sobolev/problems.hpp"

namespace sobolev {

enum class SolverStatus { converged, max_iter, numerical_failure };

std::string to_string(SolverStatus status);

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double mu0 = 0.1;
  double mu_shrink = 0.2;
  double frac_to_boundary = 0.995;

  // Primal regularization: first attempt, growth on failure, give-up level.
  double reg_initial = 1e-8;
  double reg_growth = 10.0;
  double reg_max = 1e10;

  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;

  /// Starting point; defaults to ParametricProblem::initial_point().
  std::optional<Eigen::VectorXd> x0;
};

/// Primal-dual point with the sign convention
///   grad f + J_E' lambda_eq + J_I' lambda_ineq = 0,  lambda_ineq >= 0 for cI <= 0.
struct SolverResult {
  Eigen::VectorXd x_star;
  Eigen::VectorXd lambda_eq;
  Eigen::VectorXd lambda_ineq;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  SolverStatus status = SolverStatus::numerical_failure;
};

/// Infinity norm over stationarity, equality residuals, inequality violation,
/// complementarity |lambda_i cI_i| and dual sign violation.
double kkt_residual(const ParametricProblem& problem, const Eigen::VectorXd& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& lambda_eq, const Eigen::VectorXd& lambda_ineq);

/// Interior-point Newton method on the slack-reformulated KKT system with a
/// monotone barrier schedule. Throws std::invalid_argument when p has the
/// wrong size; solver trouble is reported through `status`.
SolverResult solve(const ParametricProblem& problem, const Eigen::VectorXd& p,
                   const SolverOptions& options = {});

}  // namespace sobolev
