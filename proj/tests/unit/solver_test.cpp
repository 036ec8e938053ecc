#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "sobolev/solver.hpp"
#include "test_support.hpp"

using namespace sobolev;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Markowitz two_asset() {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.04, 0.0, 0.0, 0.09;
  return Markowitz(MarkowitzInstance::make(Eigen::VectorXd::Constant(2, 0.0), Eigen::VectorXd::Constant(2, 0.3),
                                           sigma, 1.0, 0.05, 0.5));
}

Eigen::VectorXd two_asset_p() {
  Eigen::VectorXd p(3);
  p << 0.10, 0.20, 0.2;
  return p;
}

// Dense grid over {x >= 0, x1 + x2 <= 1} at resolution 1e-3, maximizing mu'x
// over the feasible points.
Eigen::Vector2d grid_oracle(const Eigen::Vector2d& mu, const Eigen::Matrix2d& sigma, double smax) {
  Eigen::Vector2d best(0.0, 0.0);
  double best_val = -kInf;
  for (int i = 0; i <= 1000; ++i)
    for (int j = 0; i + j <= 1000; ++j) {
      const Eigen::Vector2d x(i * 1e-3, j * 1e-3);
      if (x.dot(sigma * x) > smax * smax) continue;
      const double v = mu.dot(x);
      if (v > best_val) best_val = v, best = x;
    }
  return best;
}

// Stationarity of the Markowitz Lagrangian written out by hand:
//   -mu + lr 2 Sigma x + lb 1 - z = 0.
double markowitz_kkt_by_hand(const Markowitz& prob, const Eigen::VectorXd& p, const SolverResult& r) {
  const auto& inst = prob.instance();
  const int n = prob.assets();
  const Eigen::VectorXd mu = p.head(n);
  const double smax = p[n];
  const Eigen::VectorXd& x = r.x_star;
  const Eigen::VectorXd& l = r.lambda_ineq;
  Eigen::VectorXd stat = -mu + 2.0 * l[0] * inst.sigma * x + Eigen::VectorXd::Constant(n, l[1]);
  stat -= l.tail(n);
  Eigen::VectorXd c(2 + n);
  c << x.dot(inst.sigma * x) - smax * smax, x.sum() - inst.budget, -x;
  double res = stat.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < c.size(); ++i)
    res = std::max({res, std::max(c[i], 0.0), std::abs(l[i] * c[i]), std::max(-l[i], 0.0)});
  return res;
}

void expect_converged_invariants(const ParametricProblem& prob, const Eigen::VectorXd& p, const SolverResult& r,
                                 double tol) {
  ASSERT_EQ(r.status, SolverStatus::converged) << prob.name();
  EXPECT_LE(r.kkt_residual, tol);
  EXPECT_GE(r.lambda_ineq.minCoeff(), -tol);
  const auto v = prob.evaluate(r.x_star, p);
  for (std::size_t i = 0; i < v.ineq.size(); ++i) {
    EXPECT_LE(v.ineq[i], tol);
    EXPECT_LE(std::abs(r.lambda_ineq[static_cast<Eigen::Index>(i)] * v.ineq[i]), 10.0 * tol);
  }
  EXPECT_DOUBLE_EQ(r.objective, v.objective);
}

}  // namespace

TEST(Solve, ToyQpInteriorOptimum) {
  auto prob = make_problem("toy-qp");
  Eigen::VectorXd p(1);
  p << 2.0;
  const SolverResult r = solve(*prob, p);
  expect_converged_invariants(*prob, p, r, 1e-8);
  EXPECT_NEAR(r.x_star[0], 2.0, 1e-6);
  EXPECT_NEAR(r.lambda_ineq[0], 0.0, 1e-6);
}

TEST(Solve, ToyQpActiveBound) {
  ToyQp prob(1, true, -1.0, 1.0);
  Eigen::VectorXd p(1);
  p << -0.5;
  const SolverResult r = solve(prob, p);
  expect_converged_invariants(prob, p, r, 1e-8);
  EXPECT_NEAR(r.x_star[0], 0.0, 1e-6);
  // d/dx 1/2 (x - p)^2 = -p is balanced by the bound multiplier on -x <= 0.
  EXPECT_NEAR(r.lambda_ineq[0], 0.5, 1e-6);
}

TEST(Solve, EqualityQpByClosedForm) {
  auto prob = make_function_problem(
      {"eq-qp", 2, 1, 1, 0, Eigen::VectorXd::Constant(2, -kInf), Eigen::VectorXd::Constant(2, kInf),
       Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 2.0)},
      [](auto x, auto p, auto& out) {
        out.objective = 0.5 * (x[0] * x[0] + x[1] * x[1]);
        out.eq.push_back(p[0] - x[0] - x[1]);
      });
  Eigen::VectorXd p(1);
  p << 1.0;
  const SolverResult r = solve(*prob, p);
  ASSERT_EQ(r.status, SolverStatus::converged);
  EXPECT_NEAR(r.x_star[0], 0.5, 1e-6);
  EXPECT_NEAR(r.x_star[1], 0.5, 1e-6);
  EXPECT_NEAR(r.lambda_eq[0], 0.5, 1e-6);
}

TEST(Solve, MarkowitzTwoAssetsMatchesGridOracle) {
  const Markowitz prob = two_asset();
  const Eigen::VectorXd p = two_asset_p();
  const SolverResult r = solve(prob, p);
  expect_converged_invariants(prob, p, r, 1e-8);
  const Eigen::Vector2d want = grid_oracle(p.head(2), prob.instance().sigma, p[2]);
  EXPECT_NEAR(r.x_star[0], want[0], 2e-3);
  EXPECT_NEAR(r.x_star[1], want[1], 2e-3);
  // Both rows bind: x1 = 5/13 solves 0.13 x1^2 - 0.18 x1 + 0.05 = 0 on the
  // budget line, and stationarity then gives (lr, lb) = (1.25, 0.8/13).
  EXPECT_NEAR(r.x_star[0], 5.0 / 13.0, 1e-6);
  EXPECT_NEAR(r.lambda_ineq[0], 1.25, 1e-6);
  EXPECT_NEAR(r.lambda_ineq[1], 0.8 / 13.0, 1e-6);
}

TEST(Solve, ReportedResidualMatchesHandEvaluation) {
  const Markowitz prob = two_asset();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd p = tu::uniform_in_box(rng, prob.param_lower(), prob.param_upper());
    const SolverResult r = solve(prob, p);
    ASSERT_EQ(r.status, SolverStatus::converged);
    EXPECT_NEAR(r.kkt_residual, markowitz_kkt_by_hand(prob, p, r), 1e-12);
    EXPECT_NEAR(kkt_residual(prob, p, r.x_star, r.lambda_eq, r.lambda_ineq), r.kkt_residual, 1e-12);
  }
}

TEST(Solve, ConvexInstancesIgnoreStartingPoint) {
  Markowitz prob(MarkowitzInstance::standard(4));
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd p = tu::uniform_in_box(rng, prob.param_lower(), prob.param_upper());
    SolverOptions a, b;
    a.x0 = Eigen::VectorXd::Constant(4, 0.01);
    b.x0 = tu::uniform_vector(rng, 4, 0.02, 0.2);
    const SolverResult ra = solve(prob, p, a), rb = solve(prob, p, b);
    ASSERT_EQ(ra.status, SolverStatus::converged);
    ASSERT_EQ(rb.status, SolverStatus::converged);
    EXPECT_LT((ra.x_star - rb.x_star).lpNorm<Eigen::Infinity>(), 1e-6);
  }
  ToyQp toy(3, true, -1.0, 1.0);
  Eigen::VectorXd p(3);
  p << -0.4, 0.3, 0.9;
  SolverOptions a, b;
  a.x0 = Eigen::VectorXd::Constant(3, 0.5);
  b.x0 = Eigen::VectorXd::Constant(3, 3.0);
  EXPECT_LT((solve(toy, p, a).x_star - solve(toy, p, b).x_star).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Solve, RandomMarkowitzAndAcopfSatisfyInvariants) {
  std::mt19937_64 rng(31);
  for (const char* name : {"markowitz-5", "markowitz-10", "acopf3"}) {
    auto prob = make_problem(name);
    for (int trial = 0; trial < 15; ++trial) {
      const Eigen::VectorXd p = tu::uniform_in_box(rng, prob->param_lower(), prob->param_upper());
      expect_converged_invariants(*prob, p, solve(*prob, p), 1e-8);
    }
  }
}

TEST(Solve, AcopfReferenceDemandCoversLosses) {
  AcOpf prob(AcOpf3Bus::standard());
  const Eigen::VectorXd p = prob.reference_parameter();
  const SolverResult r = solve(prob, p);
  expect_converged_invariants(prob, p, r, 1e-8);
  double gen = 0.0;
  for (int g = 0; g < 2; ++g) gen += r.x_star[AcOpf::pg_index(g)];
  EXPECT_GE(gen, p.head(3).sum());
  EXPECT_NEAR(r.x_star[AcOpf::va_index(0)], 0.0, 1e-8);
}

TEST(Solve, IterationCapReportsMaxIter) {
  Markowitz prob(MarkowitzInstance::standard(5));
  SolverOptions opt;
  opt.max_iter = 2;
  const SolverResult r = solve(prob, prob.reference_parameter(), opt);
  EXPECT_EQ(r.status, SolverStatus::max_iter);
  EXPECT_EQ(r.x_star.size(), 5);
}

TEST(Solve, InfeasibleProblemDoesNotConverge) {
  auto prob = make_function_problem(
      {"infeasible", 1, 1, 0, 2, Eigen::VectorXd::Constant(1, -kInf), Eigen::VectorXd::Constant(1, kInf),
       Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)},
      [](auto x, auto p, auto& out) {
        out.objective = x[0] * x[0] + p[0];
        out.ineq.push_back(x[0] + 1.0);
        out.ineq.push_back(1.0 - x[0]);
      });
  const SolverResult r = solve(*prob, Eigen::VectorXd::Constant(1, 0.5));
  EXPECT_NE(r.status, SolverStatus::converged);
}

TEST(Solve, RejectsBadInput) {
  auto prob = make_problem("markowitz-3");
  EXPECT_THROW(solve(*prob, Eigen::VectorXd::Zero(2)), std::invalid_argument);
  SolverOptions opt;
  opt.tol = -1.0;
  EXPECT_THROW(solve(*prob, prob->reference_parameter(), opt), std::invalid_argument);
  opt = {};
  opt.x0 = Eigen::VectorXd::Zero(7);
  EXPECT_THROW(solve(*prob, prob->reference_parameter(), opt), std::invalid_argument);
}

TEST(Status, Names) {
  EXPECT_EQ(to_string(SolverStatus::converged), "converged");
  EXPECT_EQ(to_string(SolverStatus::max_iter), "max_iter");
  EXPECT_EQ(to_string(SolverStatus::numerical_failure), "numerical_failure");
}
