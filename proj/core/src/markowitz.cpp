#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "sobolev/problems.hpp"

namespace sobolev {

MarkowitzInstance MarkowitzInstance::make(Eigen::VectorXd mu_lower, Eigen::VectorXd mu_upper,
                                          Eigen::MatrixXd sigma, double budget, double sigma_max_lower,
                                          double sigma_max_upper) {
  const Eigen::Index n = sigma.rows();
  if (sigma.cols() != n || mu_lower.size() != n || mu_upper.size() != n)
    throw std::invalid_argument("markowitz: inconsistent dimensions");
  if (!(budget > 0.0)) throw std::invalid_argument("markowitz: budget must be positive");
  if (!(sigma_max_lower > 0.0) || !(sigma_max_lower < sigma_max_upper))
    throw std::invalid_argument("markowitz: need 0 < sigma_max_lower < sigma_max_upper");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("markowitz: covariance is not positive definite");

  MarkowitzInstance inst;
  inst.mu_lower = std::move(mu_lower);
  inst.mu_upper = std::move(mu_upper);
  inst.sigma_half = llt.matrixL();
  inst.sigma = std::move(sigma);
  inst.budget = budget;
  inst.sigma_max_lower = sigma_max_lower;
  inst.sigma_max_upper = sigma_max_upper;
  return inst;
}

MarkowitzInstance MarkowitzInstance::standard(int assets) {
  const int n = assets;
  Eigen::VectorXd vol(n);
  for (int i = 0; i < n; ++i) vol[i] = 0.15 + 0.15 * i / std::max(1, n - 1);
  constexpr double rho = 0.3;
  Eigen::MatrixXd sigma(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sigma(i, j) = vol[i] * vol[j] * (i == j ? 1.0 : rho);
  return make(Eigen::VectorXd::Constant(n, 0.02), Eigen::VectorXd::Constant(n, 0.15), std::move(sigma),
              1.0, 0.05, 0.25);
}

namespace {

Eigen::VectorXd stack_params(const Eigen::VectorXd& mu, double smax) {
  Eigen::VectorXd p(mu.size() + 1);
  p << mu, smax;
  return p;
}

}  // namespace

Markowitz::Markowitz(MarkowitzInstance instance)
    : ProblemModel<Markowitz>(static_cast<int>(instance.sigma.rows()),
                              static_cast<int>(instance.sigma.rows()) + 1, 0, 2,
                              Eigen::VectorXd::Zero(instance.sigma.rows()),
                              Eigen::VectorXd::Constant(instance.sigma.rows(),
                                                        std::numeric_limits<double>::infinity()),
                              stack_params(instance.mu_lower, instance.sigma_max_lower),
                              stack_params(instance.mu_upper, instance.sigma_max_upper)),
      inst_(std::move(instance)) {}

Eigen::VectorXd Markowitz::reference_parameter() const {
  const int n = assets();
  Eigen::VectorXd mu(n);
  for (int i = 0; i < n; ++i) {
    const double t = 0.25 + 0.5 * i / std::max(1, n - 1);
    mu[i] = inst_.mu_lower[i] + t * (inst_.mu_upper[i] - inst_.mu_lower[i]);
  }
  return stack_params(mu, 0.5 * (inst_.sigma_max_lower + inst_.sigma_max_upper));
}

std::string Markowitz::name() const { return "markowitz-" + std::to_string(assets()); }

bool Markowitz::risk_feasible_quadratic(const Eigen::VectorXd& x, double sigma_max, double tol) const {
  return x.dot(inst_.sigma * x) - sigma_max * sigma_max <= tol;
}

bool Markowitz::risk_feasible_cone(const Eigen::VectorXd& x, double sigma_max, double tol) const {
  // sigma = L L', so ||L' x||^2 = x' sigma x.
  const double r = (inst_.sigma_half.transpose() * x).norm();
  return r - sigma_max <= tol;
}

}  // namespace sobolev
