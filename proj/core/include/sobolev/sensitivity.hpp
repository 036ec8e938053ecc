#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "sobolev/problems.hpp"
#include "sobolev/solver.hpp"

namespace sobolev {

enum class SensitivityStatus { regular, degenerate_complementarity, licq_violated, sosc_indefinite };

std::string to_string(SensitivityStatus status);
/// Inverse of to_string; throws std::invalid_argument for unknown names.
SensitivityStatus sensitivity_status_from_string(const std::string& name);

struct SensitivityOptions {
  double act_tol = 1e-6;  // |cI_i(x*)| <= act_tol marks row i active
  double sc_tol = 1e-6;   // active multipliers below this break strict complementarity
  // An inactive row with |cI_i| <= weak_tol and lambda_i >= weak_ratio |cI_i|
  // is weakly active. An interior-point solve to tol leaves cI_i * lambda_i
  // near tol, so a degenerate pair sits near sqrt(tol) on both sides, while a
  // genuinely inactive row has lambda_i far below its slack.
  double weak_tol = 1e-4;
  double weak_ratio = 0.1;
};

struct SensitivityResult {
  Eigen::MatrixXd dx_dp;       // n x d; empty unless regular
  Eigen::MatrixXd dlambda_dp;  // (m_eq + |active_set|) x d; empty unless regular
  std::vector<int> active_set;  // ascending indices into cI
  SensitivityStatus status = SensitivityStatus::regular;

  /// Sensitivities of all m_ineq inequality multipliers, with zero rows for
  /// inactive constraints.
  Eigen::MatrixXd dlambda_ineq_dp(int m_ineq) const;
  /// Sensitivities of the equality multipliers (first m_eq rows).
  Eigen::MatrixXd dlambda_eq_dp(int m_eq) const;
};

/// Differentiates the active-set KKT system at a converged solve:
///   F(s, p) = [grad_x L; cE; cA] = 0,   ds/dp = -(dF/ds)^{-1} dF/dp,
/// with s = (x, lambda_eq, lambda_active). Throws std::invalid_argument when
/// `result` is not converged or has mismatched sizes.
SensitivityResult kkt_sensitivity(const ParametricProblem& problem, const Eigen::VectorXd& p,
                                  const SolverResult& result, const SensitivityOptions& options = {});

}  // namespace sobolev
