#include <stdexcept>

#include "sobolev/proxy.hpp"

namespace sobolev {

namespace {

void check_head(const ProjectionHead& head, const Eigen::VectorXd& x) {
  if (head.sigma_half.rows() != x.size() || head.sigma_half.cols() != x.size())
    throw std::invalid_argument("projection head does not match the output dimension");
  if (!(head.budget > 0.0)) throw std::invalid_argument("projection budget must be positive");
}

}  // namespace

Eigen::VectorXd project_portfolio(const ProjectionHead& head, const Eigen::VectorXd& x_raw, double sigma_max) {
  check_head(head, x_raw);
  Eigen::VectorXd y = x_raw.cwiseMax(0.0);
  const double total = y.sum();
  if (total > head.budget) y *= head.budget / total;
  const double risk = (head.sigma_half.transpose() * y).norm();
  if (risk > sigma_max) y *= sigma_max / risk;
  return y;
}

Eigen::MatrixXd project_portfolio_jacobian(const ProjectionHead& head, const Eigen::VectorXd& x_raw,
                                           double sigma_max) {
  check_head(head, x_raw);
  const Eigen::Index n = x_raw.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd y = x_raw.cwiseMax(0.0);
  for (Eigen::Index i = 0; i < n; ++i) J(i, i) = x_raw[i] > 0.0 ? 1.0 : 0.0;

  const double total = y.sum();
  if (total > head.budget) {
    // d(B y / S) = (B / S)(I - y 1' / S)
    const double s = head.budget / total;
    Eigen::MatrixXd stage = s * Eigen::MatrixXd::Identity(n, n);
    stage -= (s / total) * y * Eigen::RowVectorXd::Ones(n);
    J = stage * J;
    y *= s;
  }
  const Eigen::MatrixXd sigma = head.sigma_half * head.sigma_half.transpose();
  const double risk = (head.sigma_half.transpose() * y).norm();
  if (risk > sigma_max) {
    // d(sigma y / r) = (sigma / r)(I - y (Sigma y)' / r^2)
    const double s = sigma_max / risk;
    Eigen::MatrixXd stage = s * Eigen::MatrixXd::Identity(n, n);
    stage -= (s / (risk * risk)) * y * (sigma * y).transpose();
    J = stage * J;
  }
  return J;
}

}  // namespace sobolev
