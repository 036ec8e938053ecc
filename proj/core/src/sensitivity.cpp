#include "sobolev/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace sobolev {

std::string to_string(SensitivityStatus status) {
  switch (status) {
    case SensitivityStatus::regular:
      return "regular";
    case SensitivityStatus::degenerate_complementarity:
      return "degenerate_complementarity";
    case SensitivityStatus::licq_violated:
      return "licq_violated";
    case SensitivityStatus::sosc_indefinite:
      return "sosc_indefinite";
  }
  return "unknown";
}

SensitivityStatus sensitivity_status_from_string(const std::string& name) {
  for (auto s : {SensitivityStatus::regular, SensitivityStatus::degenerate_complementarity,
                 SensitivityStatus::licq_violated, SensitivityStatus::sosc_indefinite})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown regularity status '" + name + "'");
}

Eigen::MatrixXd SensitivityResult::dlambda_ineq_dp(int m_ineq) const {
  const Eigen::Index d = dx_dp.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m_ineq, d);
  const Eigen::Index m_eq = dlambda_dp.rows() - static_cast<Eigen::Index>(active_set.size());
  for (std::size_t k = 0; k < active_set.size(); ++k)
    out.row(active_set[k]) = dlambda_dp.row(m_eq + static_cast<Eigen::Index>(k));
  return out;
}

Eigen::MatrixXd SensitivityResult::dlambda_eq_dp(int m_eq) const { return dlambda_dp.topRows(m_eq); }

SensitivityResult kkt_sensitivity(const ParametricProblem& problem, const Eigen::VectorXd& p,
                                  const SolverResult& result, const SensitivityOptions& options) {
  if (result.status != SolverStatus::converged)
    throw std::invalid_argument("kkt_sensitivity requires a converged solve");
  const int n = problem.n(), d = problem.d(), me = problem.m_eq(), mi = problem.m_ineq();
  if (result.x_star.size() != n || result.lambda_eq.size() != me || result.lambda_ineq.size() != mi ||
      p.size() != d)
    throw std::invalid_argument("kkt_sensitivity: solver result does not match the problem");

  SensitivityResult out;
  const JointFirstOrder jf = problem.joint_first_order(result.x_star, p);
  for (int i = 0; i < mi; ++i)
    if (std::abs(jf.values.ineq[static_cast<std::size_t>(i)]) <= options.act_tol) out.active_set.push_back(i);
  const int ma = static_cast<int>(out.active_set.size());

  for (int i = 0; i < mi; ++i) {
    const double c = std::abs(jf.values.ineq[static_cast<std::size_t>(i)]), lam = result.lambda_ineq[i];
    const bool active = c <= options.act_tol;
    if ((active && lam < options.sc_tol) || (!active && c <= options.weak_tol && lam >= options.weak_ratio * c)) {
      out.status = SensitivityStatus::degenerate_complementarity;
      return out;
    }
  }

  // Constraint Jacobian of the active system, split into x and p columns.
  const int m = me + ma;
  Eigen::MatrixXd A(m, n + d);
  A.topRows(me) = jf.eq_jac;
  for (int k = 0; k < ma; ++k) A.row(me + k) = jf.ineq_jac.row(out.active_set[static_cast<std::size_t>(k)]);
  const Eigen::MatrixXd Ax = A.leftCols(n);

  Eigen::MatrixXd null_basis;
  if (m > 0) {
    if (m > n) {
      out.status = SensitivityStatus::licq_violated;
      return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ax, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv[0] == 0.0 || sv[m - 1] < 1e-8 * sv[0]) {
      out.status = SensitivityStatus::licq_violated;
      return out;
    }
    null_basis = svd.matrixV().rightCols(n - m);
  } else {
    null_basis = Eigen::MatrixXd::Identity(n, n);
  }

  // Inactive multipliers are exactly zero in the active-set model.
  Eigen::VectorXd lam_ineq = Eigen::VectorXd::Zero(mi);
  for (int i : out.active_set) lam_ineq[i] = result.lambda_ineq[i];
  const Eigen::MatrixXd H = problem.lagrangian_hessian(result.x_star, p, result.lambda_eq, lam_ineq, true);
  const Eigen::MatrixXd Hxx = H.topLeftCorner(n, n);

  if (null_basis.cols() > 0) {
    const Eigen::MatrixXd reduced = null_basis.transpose() * Hxx * null_basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced, Eigen::EigenvaluesOnly);
    // A zero eigenvalue leaves the KKT matrix singular, so the strict
    // second-order condition is required rather than mere semidefiniteness.
    if (eig.eigenvalues().minCoeff() < 1e-8) {
      out.status = SensitivityStatus::sosc_indefinite;
      return out;
    }
  }

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = Hxx;
  K.topRightCorner(n, m) = Ax.transpose();
  K.bottomLeftCorner(m, n) = Ax;
  Eigen::MatrixXd rhs(n + m, d);
  rhs.topRows(n) = H.topRightCorner(n, d);
  rhs.bottomRows(m) = A.rightCols(d);

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  const Eigen::MatrixXd ds = -lu.solve(rhs);
  if (!ds.allFinite()) {
    out.status = SensitivityStatus::sosc_indefinite;
    return out;
  }
  out.dx_dp = ds.topRows(n);
  out.dlambda_dp = ds.bottomRows(m);
  return out;
}

}  // namespace sobolev
