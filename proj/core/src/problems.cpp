#include "sobolev/problems.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <string>

namespace sobolev {

ParametricProblem::ParametricProblem(int n, int d, int m_eq, int m_native_ineq, Eigen::VectorXd lower,
                                     Eigen::VectorXd upper, Eigen::VectorXd param_lower,
                                     Eigen::VectorXd param_upper)
    : n_(n),
      d_(d),
      m_eq_(m_eq),
      m_native_ineq_(m_native_ineq),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      param_lower_(std::move(param_lower)),
      param_upper_(std::move(param_upper)) {
  if (n_ <= 0 || d_ <= 0 || m_eq_ < 0 || m_native_ineq_ < 0)
    throw std::invalid_argument("problem dimensions must be positive");
  if (lower_.size() != n_ || upper_.size() != n_)
    throw std::invalid_argument("variable bounds must have n entries");
  if (param_lower_.size() != d_ || param_upper_.size() != d_)
    throw std::invalid_argument("parameter box must have d entries");
  for (int k = 0; k < d_; ++k)
    if (!(param_lower_[k] < param_upper_[k]))
      throw std::invalid_argument("parameter box requires p_lo < p_hi");
  for (int i = 0; i < n_; ++i) {
    if (lower_[i] > upper_[i]) throw std::invalid_argument("variable bounds are inverted");
    if (std::isfinite(lower_[i])) bound_rows_.push_back({i, true, lower_[i]});
    if (std::isfinite(upper_[i])) bound_rows_.push_back({i, false, upper_[i]});
  }
}

void ParametricProblem::check_dims(std::size_t nx, std::size_t np) const {
  if (nx != static_cast<std::size_t>(n_) || np != static_cast<std::size_t>(d_))
    throw std::invalid_argument(name() + ": expected x of size " + std::to_string(n_) +
                                " and p of size " + std::to_string(d_) + ", got " +
                                std::to_string(nx) + " and " + std::to_string(np));
}

Eigen::VectorXd ParametricProblem::initial_point() const {
  Eigen::VectorXd x0(n_);
  for (int i = 0; i < n_; ++i) {
    const bool lo = std::isfinite(lower_[i]), hi = std::isfinite(upper_[i]);
    if (lo && hi)
      x0[i] = 0.5 * (lower_[i] + upper_[i]);
    else if (lo)
      x0[i] = std::max(lower_[i], 0.0);
    else if (hi)
      x0[i] = std::min(upper_[i], 0.0);
    else
      x0[i] = 0.0;
  }
  return x0;
}

ProblemValues<double> ParametricProblem::evaluate(const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& p) const {
  return evaluate_as<double>(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                             std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

namespace {

// Entry i of v becomes direction offset + i of `total` (or a constant).
std::vector<ad::Dual> seeded_duals(const Eigen::VectorXd& v, std::size_t offset, std::size_t total,
                                   bool seed) {
  std::vector<ad::Dual> out;
  out.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (seed)
      out.push_back(ad::Dual::variable(v[i], offset + static_cast<std::size_t>(i), total));
    else
      out.emplace_back(v[i]);
  }
  return out;
}

ProblemValues<double> strip(const ProblemValues<ad::Dual>& v) {
  ProblemValues<double> out;
  out.objective = v.objective.value();
  for (const auto& c : v.eq) out.eq.push_back(c.value());
  for (const auto& c : v.ineq) out.ineq.push_back(c.value());
  return out;
}

template <class Row>
void fill_row(Row&& row, const ad::Dual& y) {
  for (Eigen::Index c = 0; c < row.size(); ++c) row(c) = y.deriv(static_cast<std::size_t>(c));
}

}  // namespace

FirstOrder ParametricProblem::first_order(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const {
  check_dims(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(p.size()));
  const auto n = static_cast<std::size_t>(n_);
  const auto xs = seeded_duals(x, 0, n, true);
  const auto ps = seeded_duals(p, 0, n, false);
  const auto v = evaluate_as<ad::Dual>(xs, ps);

  FirstOrder out;
  out.values = strip(v);
  out.objective_grad.resize(n_);
  fill_row(out.objective_grad, v.objective);
  out.eq_jac.resize(m_eq_, n_);
  for (int r = 0; r < m_eq_; ++r) fill_row(out.eq_jac.row(r), v.eq[static_cast<std::size_t>(r)]);
  out.ineq_jac.resize(m_ineq(), n_);
  for (int r = 0; r < m_ineq(); ++r) fill_row(out.ineq_jac.row(r), v.ineq[static_cast<std::size_t>(r)]);
  return out;
}

JointFirstOrder ParametricProblem::joint_first_order(const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& p) const {
  check_dims(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(p.size()));
  const auto total = static_cast<std::size_t>(n_ + d_);
  const auto xs = seeded_duals(x, 0, total, true);
  const auto ps = seeded_duals(p, static_cast<std::size_t>(n_), total, true);
  const auto v = evaluate_as<ad::Dual>(xs, ps);

  JointFirstOrder out;
  out.values = strip(v);
  out.objective_grad.resize(n_ + d_);
  fill_row(out.objective_grad, v.objective);
  out.eq_jac.resize(m_eq_, n_ + d_);
  for (int r = 0; r < m_eq_; ++r) fill_row(out.eq_jac.row(r), v.eq[static_cast<std::size_t>(r)]);
  out.ineq_jac.resize(m_ineq(), n_ + d_);
  for (int r = 0; r < m_ineq(); ++r) fill_row(out.ineq_jac.row(r), v.ineq[static_cast<std::size_t>(r)]);
  return out;
}

Eigen::MatrixXd ParametricProblem::lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                                                      const Eigen::VectorXd& lam_eq,
                                                      const Eigen::VectorXd& lam_ineq,
                                                      bool with_params) const {
  check_dims(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(p.size()));
  if (lam_eq.size() != m_eq_ || lam_ineq.size() != m_ineq())
    throw std::invalid_argument(name() + ": multiplier dimension mismatch");
  const int dim = with_params ? n_ + d_ : n_;
  Eigen::MatrixXd H(dim, dim);

  std::vector<ad::HyperDual> xs(static_cast<std::size_t>(n_)), ps(static_cast<std::size_t>(d_));
  auto seed = [&](int k, int i, int j) -> ad::HyperDual {
    return {k < n_ ? x[k] : p[k - n_], k == i ? 1.0 : 0.0, k == j ? 1.0 : 0.0, 0.0};
  };
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      for (int k = 0; k < n_; ++k) xs[static_cast<std::size_t>(k)] = seed(k, i, j);
      for (int k = 0; k < d_; ++k) ps[static_cast<std::size_t>(k)] = seed(n_ + k, i, j);
      const auto v = evaluate_as<ad::HyperDual>(xs, ps);
      double h = v.objective.d12;
      for (int r = 0; r < m_eq_; ++r) h += lam_eq[r] * v.eq[static_cast<std::size_t>(r)].d12;
      for (int r = 0; r < m_ineq(); ++r) h += lam_ineq[r] * v.ineq[static_cast<std::size_t>(r)].d12;
      H(i, j) = h;
      H(j, i) = h;
    }
  }
  return H;
}

// ---------------------------------------------------------------------------

ToyQp::ToyQp(int dim, bool nonnegative, double p_lo, double p_hi)
    : ProblemModel<ToyQp>(dim, dim, 0, 0,
                          Eigen::VectorXd::Constant(dim, nonnegative ? 0.0
                                                                     : -std::numeric_limits<double>::infinity()),
                          Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity()),
                          Eigen::VectorXd::Constant(dim, p_lo), Eigen::VectorXd::Constant(dim, p_hi)),
      dim_(dim) {}

std::string ToyQp::name() const { return dim_ == 1 ? "toy-qp" : "toy-qp-" + std::to_string(dim_); }

// ---------------------------------------------------------------------------

PenalizedProblem::PenalizedProblem(const ParametricProblem& problem, double beta_weight,
                                   double gamma_weight)
    : base(&problem), beta(beta_weight), gamma(gamma_weight) {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("penalty weights must be >= 0");
}

double penalized_objective(const PenalizedProblem& pen, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& p) {
  return pen.value<double>(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                           std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

Eigen::VectorXd penalized_gradient(const PenalizedProblem& pen, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& p) {
  std::vector<ad::Dual> ps;
  ps.reserve(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) ps.emplace_back(p[i]);
  return ad::gradient(
      [&](std::span<const ad::Dual> xs) { return pen.value<ad::Dual>(xs, ps); }, x);
}

// ---------------------------------------------------------------------------

namespace {

bool parse_suffix(std::string_view name, std::string_view prefix, int& out) {
  if (name.substr(0, prefix.size()) != prefix) return false;
  const std::string_view digits = name.substr(prefix.size());
  if (digits.empty()) return false;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), out);
  return res.ec == std::errc() && res.ptr == digits.data() + digits.size() && out > 0;
}

}  // namespace

std::unique_ptr<ParametricProblem> make_problem(std::string_view name) {
  int k = 0;
  if (name == "toy-qp") return std::make_unique<ToyQp>(1, true, 1.0, 2.0);
  if (parse_suffix(name, "toy-qp-", k)) return std::make_unique<ToyQp>(k, true, 1.0, 2.0);
  if (parse_suffix(name, "markowitz-", k)) {
    if (k < 2) throw std::invalid_argument("markowitz needs at least 2 assets");
    return std::make_unique<Markowitz>(MarkowitzInstance::standard(k));
  }
  if (name == "acopf3") return std::make_unique<AcOpf>(AcOpf3Bus::standard());
  throw std::invalid_argument("unknown problem '" + std::string(name) +
                              "' (expected toy-qp, toy-qp-N, markowitz-N, acopf3)");
}

}  // namespace sobolev
