#include "sobolev/proxy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace sobolev;

namespace {

ProxyModel zero_model(int d, std::vector<int> hidden, int n, Activation a) {
  ProxyModel m(d, hidden, n, a, 1);
  m.set_parameters(Eigen::VectorXd::Zero(m.parameter_count()));
  return m;
}

// Straight-line evaluation with plain loops, no shared code with the model.
Eigen::VectorXd loop_forward(const ProxyModel& m, const Eigen::VectorXd& p) {
  std::vector<double> a(p.data(), p.data() + p.size());
  for (int l = 0; l < m.layers(); ++l) {
    const Eigen::MatrixXd& W = m.weight(l);
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (int r = 0; r < W.rows(); ++r) {
      double s = m.bias(l)[r];
      for (int c = 0; c < W.cols(); ++c) s += W(r, c) * a[static_cast<std::size_t>(c)];
      if (l + 1 < m.layers()) s = std::log(1.0 + std::exp(s));
      z[static_cast<std::size_t>(r)] = s;
    }
    a = z;
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

double min_abs_preactivation(const ProxyModel& m, const Eigen::VectorXd& p) {
  double best = 1e300;
  Eigen::VectorXd a = p;
  for (int l = 0; l + 1 < m.layers(); ++l) {
    Eigen::VectorXd z = m.weight(l) * a + m.bias(l);
    best = std::min(best, z.cwiseAbs().minCoeff());
    a = z.unaryExpr([&](double v) { return activate(m.activation(), v); });
  }
  return best;
}

SolutionRecord random_record(std::mt19937_64& rng, const ParametricProblem& prob, double sparsity, int idx) {
  SolutionRecord rec;
  rec.p = tu::uniform_in_box(rng, prob.param_lower(), prob.param_upper());
  rec.x_star = tu::uniform_vector(rng, prob.n(), 0.0, 0.5);
  rec.mask = sample_mask(prob.n(), prob.d(), sparsity, static_cast<std::uint64_t>(idx) + 11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& [r, c] : rec.mask.kept_entries) rec.jac_entries.push_back({r, c, u(rng)});
  return rec;
}

double batch_loss(const ProxyModel& m, const std::vector<const SolutionRecord*>& batch, const LossSpec& spec) {
  return loss_and_gradient(m, batch, spec).loss.total;
}

void expect_gradient_matches_fd(ProxyModel model, const std::vector<const SolutionRecord*>& batch,
                                const LossSpec& spec) {
  const LossGradient lg = loss_and_gradient(model, batch, spec);
  const Eigen::VectorXd theta = model.parameters();
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    model.set_parameters(tp);
    const double fp = batch_loss(model, batch, spec);
    model.set_parameters(tm);
    const double fm = batch_loss(model, batch, spec);
    const double fd = (fp - fm) / (2.0 * h);
    ASSERT_LE(std::abs(lg.grad[k] - fd), 1e-4 * std::abs(fd) + 1e-7)
        << "component " << k << " mode " << to_string(spec.mode) << " act " << to_string(model.activation());
  }
  model.set_parameters(theta);
}

}  // namespace

TEST(Activation, NamesRoundTrip) {
  for (auto a : {Activation::tanh, Activation::softplus, Activation::sigmoid, Activation::relu,
                 Activation::leaky_relu})
    EXPECT_EQ(activation_from_string(to_string(a)), a);
  EXPECT_THROW(activation_from_string("gelu"), std::invalid_argument);
  EXPECT_TRUE(is_smooth(Activation::softplus));
  EXPECT_FALSE(is_smooth(Activation::relu));
}

TEST(Activation, DerivativesMatchFiniteDifferences) {
  for (auto a : {Activation::tanh, Activation::softplus, Activation::sigmoid}) {
    for (double z : {-30.0, -3.0, -0.4, 0.0, 0.7, 2.5, 30.0}) {
      const double h = 1e-5;
      const double d1 = (activate(a, z + h) - activate(a, z - h)) / (2 * h);
      const double d2 = (activate_d1(a, z + h) - activate_d1(a, z - h)) / (2 * h);
      EXPECT_NEAR(activate_d1(a, z), d1, 1e-8) << to_string(a) << " " << z;
      EXPECT_NEAR(activate_d2(a, z), d2, 1e-8) << to_string(a) << " " << z;
    }
  }
  EXPECT_EQ(activate(Activation::leaky_relu, -2.0), -0.02);
  EXPECT_TRUE(std::isfinite(activate(Activation::softplus, 800.0)));
  EXPECT_EQ(activate(Activation::softplus, 800.0), 800.0);
}

TEST(Forward, ZeroNetworkGivesZero) {
  const ProxyModel m = zero_model(3, {8, 8}, 2, Activation::tanh);
  EXPECT_TRUE(m.forward(Eigen::Vector3d(0.3, -1.0, 2.0)).isZero(0.0));
}

TEST(Forward, SingleLayerIsAffine) {
  ProxyModel m(3, {}, 2, Activation::tanh, 5);
  Eigen::MatrixXd W(2, 3);
  W << 1, 2, 3, -1, 0.5, 0.25;
  m.weight(0) = W;
  m.bias(0) = Eigen::Vector2d(0.1, -0.2);
  const Eigen::Vector3d p(1.0, -2.0, 0.5);
  const Eigen::Vector2d want = W * p + Eigen::Vector2d(0.1, -0.2);
  EXPECT_TRUE(m.forward(p) == want);
  EXPECT_TRUE(m.input_jacobian(p) == W);
}

TEST(Forward, SoftplusMatchesLoopOracle) {
  std::mt19937_64 rng(3);
  ProxyModel m(4, {7, 5}, 3, Activation::softplus, 9);
  for (int l = 0; l < m.layers(); ++l) m.bias(l) = tu::uniform_vector(rng, m.bias(l).size(), -0.5, 0.5);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd p = tu::uniform_vector(rng, 4, -2.0, 2.0);
    EXPECT_LE((m.forward(p) - loop_forward(m, p)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Forward, InitializationIsDeterministicAndBounded) {
  ProxyModel a(5, {16}, 3, Activation::tanh, 77), b(5, {16}, 3, Activation::tanh, 77),
      c(5, {16}, 3, Activation::tanh, 78);
  EXPECT_TRUE(a.parameters() == b.parameters());
  EXPECT_FALSE(a.parameters() == c.parameters());
  EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 21.0));
  EXPECT_TRUE(a.bias(0).isZero(0.0));
  EXPECT_EQ(a.parameter_count(), 5 * 16 + 16 + 16 * 3 + 3);
  EXPECT_THROW(a.forward(Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST(InputJacobian, MatchesFiniteDifferencesForSmoothActivations) {
  std::mt19937_64 rng(17);
  for (auto act : {Activation::tanh, Activation::softplus, Activation::sigmoid}) {
    ProxyModel m(4, {12, 9}, 3, act, 21);
    for (int l = 0; l < m.layers(); ++l) m.bias(l) = tu::uniform_vector(rng, m.bias(l).size(), -0.3, 0.3);
    for (int t = 0; t < 100; ++t) {
      const Eigen::VectorXd p = tu::uniform_vector(rng, 4, -1.5, 1.5);
      const Eigen::MatrixXd fd = tu::fd_jacobian([&](const Eigen::VectorXd& q) { return m.forward_raw(q); }, p);
      EXPECT_LE(tu::rel_inf_err(m.input_jacobian(p), fd, 1e-3), 1e-5) << to_string(act);
    }
  }
}

TEST(InputJacobian, ReluAwayFromKinks) {
  std::mt19937_64 rng(19);
  for (auto act : {Activation::relu, Activation::leaky_relu}) {
    ProxyModel m(3, {10, 10}, 2, act, 4);
    int checked = 0;
    while (checked < 30) {
      const Eigen::VectorXd p = tu::uniform_vector(rng, 3, -1.0, 1.0);
      if (min_abs_preactivation(m, p) < 1e-3) continue;
      const Eigen::MatrixXd fd = tu::fd_jacobian([&](const Eigen::VectorXd& q) { return m.forward_raw(q); }, p);
      EXPECT_LE(tu::rel_inf_err(m.input_jacobian(p), fd, 1e-3), 1e-5);
      ++checked;
    }
  }
}

TEST(Persistence, JsonRoundTripIsExact) {
  ProxyModel m(4, {6, 5}, 3, Activation::sigmoid, 8);
  m.bias(1)[2] = 0.1 + 1e-17;
  m.set_projection(ProjectionHead::from(MarkowitzInstance::standard(3)));
  const ProxyModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.widths(), m.widths());
  EXPECT_EQ(back.activation(), m.activation());
  EXPECT_TRUE(back.parameters() == m.parameters());
  ASSERT_TRUE(back.projection().has_value());
  EXPECT_TRUE(back.projection()->sigma_half == m.projection()->sigma_half);
  EXPECT_EQ(back.projection()->budget, m.projection()->budget);
  EXPECT_THROW(model_from_json("{}"), std::runtime_error);
  EXPECT_THROW(model_from_json("not json"), std::runtime_error);
}

// ---------------------------------------------------------------------------

TEST(Projection, FeasibleInputIsUnchanged) {
  const ProjectionHead head{Eigen::MatrixXd::Identity(2, 2), 1.0};
  const Eigen::Vector2d x(0.2, 0.3);
  EXPECT_TRUE(project_portfolio(head, x, 1.0) == x);
}

TEST(Projection, ClipOnly) {
  const ProjectionHead head{Eigen::MatrixXd::Identity(2, 2), 1.0};
  EXPECT_TRUE(project_portfolio(head, Eigen::Vector2d(-1.0, 0.5), 1e9) == Eigen::Vector2d(0.0, 0.5));
}

TEST(Projection, BudgetThenRisk) {
  const ProjectionHead head{Eigen::MatrixXd::Identity(2, 2), 1.0};
  const Eigen::VectorXd y = project_portfolio(head, Eigen::Vector2d(2.0, 2.0), 0.1);
  // (2,2) -> (0.5,0.5) with norm sqrt(0.5); scaled to 0.1.
  const double want = 0.5 * 0.1 / std::sqrt(0.5);
  EXPECT_NEAR(y[0], want, 1e-15);
  EXPECT_NEAR(y[1], want, 1e-15);
  EXPECT_NEAR(want, 0.070710678118654752, 1e-15);
}

TEST(Projection, RandomInputsAreFeasibleAndIdempotent) {
  const MarkowitzInstance inst = MarkowitzInstance::standard(5);
  const ProjectionHead head = ProjectionHead::from(inst);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> logmag(-3.0, 6.0), sig(0.05, 0.25);
  for (int t = 0; t < 10000; ++t) {
    const double scale = std::pow(10.0, logmag(rng));
    const Eigen::VectorXd x = tu::uniform_vector(rng, 5, -scale, scale);
    const double s = sig(rng);
    const Eigen::VectorXd y = project_portfolio(head, x, s);
    ASSERT_GE(y.minCoeff(), 0.0);
    ASSERT_LE(y.sum(), inst.budget + 1e-9);
    ASSERT_LE((inst.sigma_half.transpose() * y).norm(), s + 1e-9);
    const Eigen::VectorXd yy = project_portfolio(head, y, s);
    ASSERT_LE((yy - y).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Projection, JacobianMatchesFiniteDifferences) {
  const MarkowitzInstance inst = MarkowitzInstance::standard(4);
  const ProjectionHead head = ProjectionHead::from(inst);
  std::mt19937_64 rng(29);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x = tu::uniform_vector(rng, 4, -0.6, 1.2);
    if (x.cwiseAbs().minCoeff() < 1e-3) continue;
    const double s = 0.1;
    const Eigen::MatrixXd fd =
        tu::fd_jacobian([&](const Eigen::VectorXd& q) { return project_portfolio(head, q, s); }, x, 1e-7);
    // Skip points within a step of a switching boundary.
    const Eigen::VectorXd c = x.cwiseMax(0.0);
    const double sum = c.sum();
    const Eigen::VectorXd b = sum > 1.0 ? Eigen::VectorXd(c / sum) : c;
    if (std::abs(sum - 1.0) < 1e-4 || std::abs((inst.sigma_half.transpose() * b).norm() - s) < 1e-4) continue;
    EXPECT_LE(tu::rel_inf_err(project_portfolio_jacobian(head, x, s), fd), 1e-6);
  }
}

// ---------------------------------------------------------------------------

TEST(Loss, ValueModeIsPlainMse) {
  ProxyModel m(2, {}, 2, Activation::tanh, 1);
  m.weight(0).setZero();
  m.bias(0) = Eigen::Vector2d(1.0, 1.0);
  SolutionRecord rec;
  rec.p = Eigen::Vector2d(0.3, 0.4);
  rec.x_star = Eigen::Vector2d(0.0, 0.0);
  EXPECT_EQ(record_loss(m, rec, {}).value, 1.0);
}

TEST(Loss, LambdaZeroEqualsValueModeExactly) {
  auto prob = make_problem("markowitz-3");
  std::mt19937_64 rng(31);
  std::vector<SolutionRecord> recs;
  for (int i = 0; i < 6; ++i) recs.push_back(random_record(rng, *prob, 0.5, i));
  std::vector<const SolutionRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  const ProxyModel m(prob->d(), {10}, prob->n(), Activation::tanh, 3);
  const LossGradient a = loss_and_gradient(m, batch, {LossMode::value, 0.0});
  const LossGradient b = loss_and_gradient(m, batch, {LossMode::sobolev, 0.0});
  EXPECT_EQ(a.loss.total, b.loss.total);
  EXPECT_EQ(b.loss.jacobian, 0.0);
  EXPECT_TRUE(a.grad == b.grad);

  // Empty masks on every record behave like lambda = 0.
  for (auto& r : recs) r.jac_entries.clear();
  const LossGradient c = loss_and_gradient(m, batch, {LossMode::sobolev, 5.0});
  EXPECT_EQ(c.loss.total, a.loss.total);
  EXPECT_TRUE(c.grad == a.grad);
}

TEST(Loss, DegenerateRecordsContributeValueOnly) {
  auto prob = make_problem("markowitz-3");
  std::mt19937_64 rng(37);
  SolutionRecord rec = random_record(rng, *prob, 0.0, 1);
  const ProxyModel m(prob->d(), {8}, prob->n(), Activation::tanh, 3);
  const double value = record_loss(m, rec, {LossMode::value, 0.0}).total;
  rec.jac_entries.clear();
  rec.regularity = "degenerate_complementarity";
  EXPECT_EQ(record_loss(m, rec, {LossMode::sobolev, 2.0}).total, value);
}

TEST(Loss, SobolevClosedFormOnToyQp) {
  // Single linear layer on toy-qp-2: J = W, target all ones.
  ProxyModel m(2, {}, 2, Activation::tanh, 1);
  Eigen::Matrix2d W;
  W << 0.5, -1.0, 2.0, 1.25;
  m.weight(0) = W;
  m.bias(0).setZero();
  SolutionRecord rec;
  rec.p = Eigen::Vector2d(0.2, 0.1);
  rec.x_star = rec.p;
  rec.mask.kept_entries = {{0, 0}, {1, 1}, {1, 0}};
  for (const auto& [r, c] : rec.mask.kept_entries) rec.jac_entries.push_back({r, c, 1.0});
  const Eigen::Vector2d y = W * rec.p;
  const double value = 0.5 * (y - rec.p).squaredNorm();
  const double jac = (0.25 + 0.0625 + 1.0) / 3.0;
  const LossTerms t = record_loss(m, rec, {LossMode::sobolev, 0.3});
  EXPECT_NEAR(t.value, value, 1e-15);
  EXPECT_NEAR(t.jacobian, jac, 1e-15);
  EXPECT_NEAR(t.total, value + 0.3 * jac, 1e-15);
}

TEST(Loss, ReluWithSobolevWarns) {
  auto prob = make_problem("toy-qp");
  SolutionRecord rec;
  rec.p = Eigen::VectorXd::Constant(1, 0.3);
  rec.x_star = rec.p;
  const ProxyModel m(1, {4}, 1, Activation::relu, 1);
  EXPECT_FALSE(loss_and_gradient(m, {&rec}, {LossMode::sobolev, 0.1}).warnings.empty());
  EXPECT_TRUE(loss_and_gradient(m, {&rec}, {LossMode::value, 0.1}).warnings.empty());
  const ProxyModel t(1, {4}, 1, Activation::tanh, 1);
  EXPECT_TRUE(loss_and_gradient(t, {&rec}, {LossMode::sobolev, 0.1}).warnings.empty());
}

TEST(Loss, TanhFourRecordsGradientMatchesFiniteDifferences) {
  auto prob = make_problem("markowitz-3");
  std::mt19937_64 rng(41);
  std::vector<SolutionRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(random_record(rng, *prob, 0.25, i));
  std::vector<const SolutionRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  ProxyModel m(prob->d(), {12, 8}, prob->n(), Activation::tanh, 43);
  for (int l = 0; l < m.layers(); ++l) m.bias(l) = tu::uniform_vector(rng, m.bias(l).size(), -0.3, 0.3);
  expect_gradient_matches_fd(m, batch, {LossMode::sobolev, 0.3});
}

TEST(Loss, EveryModeAndSmoothActivationMatchesFiniteDifferences) {
  auto prob = make_problem("markowitz-3");
  const PenalizedProblem pen(*prob, 100.0, 100.0);
  std::mt19937_64 rng(47);
  std::vector<SolutionRecord> recs;
  for (int i = 0; i < 8; ++i) recs.push_back(random_record(rng, *prob, 0.4, i));
  recs[3].jac_entries.clear();
  recs[3].regularity = "licq_violated";
  std::vector<const SolutionRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  for (auto act : {Activation::tanh, Activation::softplus, Activation::sigmoid}) {
    for (auto mode : {LossMode::value, LossMode::sobolev, LossMode::selfsup, LossMode::selfsup_sobolev}) {
      const std::vector<int> hidden = act == Activation::tanh ? std::vector<int>{32} : std::vector<int>{9, 7};
      ProxyModel m(prob->d(), hidden, prob->n(), act, 53);
      for (int l = 0; l < m.layers(); ++l) m.bias(l) = tu::uniform_vector(rng, m.bias(l).size(), -0.3, 0.3);
      expect_gradient_matches_fd(m, batch, {mode, 0.7, &pen});
    }
  }
}

TEST(Loss, GradientThroughProjectionHeadMatchesFiniteDifferences) {
  auto prob = make_problem("markowitz-3");
  const auto& mk = dynamic_cast<const Markowitz&>(*prob);
  const PenalizedProblem pen(*prob, 100.0, 100.0);
  std::mt19937_64 rng(59);
  std::vector<SolutionRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(random_record(rng, *prob, 0.3, i));
  std::vector<const SolutionRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  for (auto mode : {LossMode::sobolev, LossMode::selfsup_sobolev}) {
    ProxyModel m(prob->d(), {10}, prob->n(), Activation::softplus, 61);
    m.bias(1) = Eigen::VectorXd::Constant(prob->n(), 0.4);  // exercise clip, budget and risk stages
    m.set_projection(ProjectionHead::from(mk.instance()));
    expect_gradient_matches_fd(m, batch, {mode, 0.5, &pen});
  }
}

TEST(Loss, ThreadCountDoesNotChangeResult) {
  auto prob = make_problem("markowitz-3");
  std::mt19937_64 rng(67);
  std::vector<SolutionRecord> recs;
  for (int i = 0; i < 16; ++i) recs.push_back(random_record(rng, *prob, 0.5, i));
  std::vector<const SolutionRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  const ProxyModel m(prob->d(), {16}, prob->n(), Activation::tanh, 3);
  const LossGradient a = loss_and_gradient(m, batch, {LossMode::sobolev, 0.3}, 1);
  const LossGradient b = loss_and_gradient(m, batch, {LossMode::sobolev, 0.3}, 4);
  EXPECT_EQ(a.loss.total, b.loss.total);
  EXPECT_TRUE(a.grad == b.grad);
}

TEST(Loss, SelfsupWithoutPenaltyThrows) {
  SolutionRecord rec;
  rec.p = Eigen::VectorXd::Constant(1, 0.3);
  rec.x_star = rec.p;
  const ProxyModel m(1, {4}, 1, Activation::tanh, 1);
  EXPECT_THROW(record_loss(m, rec, {LossMode::selfsup, 0.0}), std::invalid_argument);
  EXPECT_EQ(loss_mode_from_string("selfsup_sobolev"), LossMode::selfsup_sobolev);
  EXPECT_THROW(loss_mode_from_string("l1"), std::invalid_argument);
}
