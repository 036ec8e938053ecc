#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "sobolev/eval.hpp"

namespace sobolev {

using detail::json;

Interpolant1D::Interpolant1D(Kind kind, std::vector<double> knots, std::vector<double> values,
                             std::vector<double> slopes)
    : kind_(kind), t_(std::move(knots)), y_(std::move(values)), m_(std::move(slopes)) {
  if (t_.size() < 2 || y_.size() != t_.size()) throw std::invalid_argument("interpolant needs >= 2 knots with values");
  if (kind_ == Kind::hermite && m_.size() != t_.size())
    throw std::invalid_argument("Hermite interpolant needs one slope per knot");
  for (std::size_t i = 1; i < t_.size(); ++i)
    if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("interpolant knots must increase");
}

std::size_t Interpolant1D::segment(double x) const {
  const auto it = std::upper_bound(t_.begin(), t_.end(), x);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - t_.begin(), 1)) - 1;
  return std::min(i, t_.size() - 2);
}

double Interpolant1D::value(double x) const {
  const std::size_t i = segment(x);
  const double h = t_[i + 1] - t_[i], s = (x - t_[i]) / h;
  if (kind_ == Kind::linear) return y_[i] + s * (y_[i + 1] - y_[i]);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * m_[i] + (-2 * s3 + 3 * s2) * y_[i + 1] +
         (s3 - s2) * h * m_[i + 1];
}

double Interpolant1D::derivative(double x) const {
  const std::size_t i = segment(x);
  const double h = t_[i + 1] - t_[i], s = (x - t_[i]) / h;
  if (kind_ == Kind::linear) return (y_[i + 1] - y_[i]) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * y_[i] + (-6 * s2 + 6 * s) * y_[i + 1]) / h + (3 * s2 - 4 * s + 1) * m_[i] +
         (3 * s2 - 2 * s) * m_[i + 1];
}

bool BoundVerification::bounds_pass() const {
  return std::all_of(bounds.begin(), bounds.end(), [](const BoundRecord& b) { return b.pass; });
}

bool BoundVerification::rates_pass() const {
  return std::all_of(rates.begin(), rates.end(), [](const RateRecord& r) { return r.pass; });
}

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  v.back() = hi;
  return v;
}

std::vector<Eigen::VectorXd> as_points(const std::vector<double>& v) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(Eigen::VectorXd::Constant(1, x));
  return out;
}

// Largest difference quotient over adjacent points of a fine grid.
template <class F>
double lipschitz_1d(F&& f, const std::vector<double>& fine) {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  pairs.reserve(fine.size() - 1);
  for (std::size_t i = 1; i < fine.size(); ++i)
    pairs.emplace_back(Eigen::VectorXd::Constant(1, fine[i - 1]), Eigen::VectorXd::Constant(1, fine[i]));
  return estimate_lipschitz([&](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, f(x[0])); }, pairs);
}

// Round-off allowance for exactly reproduced maps, where bound and error are both ~0.
constexpr double kRoundoff = 1e-12;

}  // namespace

BoundVerification verify_bounds(const ScalarReference& g, const BoundOptions& opt) {
  if (opt.grid < 2 || opt.pairs < 1) throw std::invalid_argument("verify_bounds: grid and pairs must be >= 2 and >= 1");
  if (!(g.hi > g.lo)) throw std::invalid_argument("verify_bounds: empty domain");
  for (int n : opt.points)
    if (n < 2) throw std::invalid_argument("verify_bounds: every training set needs >= 2 points");

  BoundVerification out;
  out.reference = g.name;
  const std::vector<double> grid = linspace(g.lo, g.hi, opt.grid);
  const std::vector<double> fine = linspace(g.lo, g.hi, opt.pairs + 1);
  const std::vector<Eigen::VectorXd> grid_pts = as_points(grid);
  const double L_g = lipschitz_1d(g.f, fine);
  const double M_g = lipschitz_1d(g.df, fine);

  std::vector<double> lin_err, herm_err;
  for (int n : opt.points) {
    const std::vector<double> knots = linspace(g.lo, g.hi, n);
    std::vector<double> y, m;
    for (double t : knots) {
      y.push_back(g.f(t));
      m.push_back(g.df(t));
    }
    const Interpolant1D lin(Interpolant1D::Kind::linear, knots, y);
    const Interpolant1D herm(Interpolant1D::Kind::hermite, knots, y, m);
    const double delta = covering_radius(as_points(knots), grid_pts);

    double e_lin = 0.0, e_herm = 0.0, e_herm_d = 0.0;
    for (double x : grid) {
      e_lin = std::max(e_lin, std::abs(lin.value(x) - g.f(x)));
      e_herm = std::max(e_herm, std::abs(herm.value(x) - g.f(x)));
      e_herm_d = std::max(e_herm_d, std::abs(herm.derivative(x) - g.df(x)));
    }
    lin_err.push_back(e_lin);
    herm_err.push_back(e_herm);

    const double L_lin = lipschitz_1d([&](double x) { return lin.value(x); }, fine);
    const double L_herm = lipschitz_1d([&](double x) { return herm.value(x); }, fine);
    const double M_herm = lipschitz_1d([&](double x) { return herm.derivative(x); }, fine);

    auto add = [&](const char* theorem, const char* interp, double cg, double ch, double err, double bound) {
      out.bounds.push_back({theorem, interp, n, delta, cg, ch, err, bound, err <= bound + kRoundoff});
    };
    add("value", "linear", L_g, L_lin, e_lin, (L_g + L_lin) * delta);
    add("value", "hermite", L_g, L_herm, e_herm, (L_g + L_herm) * delta);
    add("jacobian", "hermite", M_g, M_herm, e_herm_d, (M_g + M_herm) * delta);
    add("sobolev", "hermite", M_g, M_herm, e_herm, 0.5 * (M_g + M_herm) * delta * delta);
  }

  for (std::size_t k = 0; k + 1 < opt.points.size(); ++k) {
    const int a = opt.points[k], b = opt.points[k + 1];
    if (b - 1 != 2 * (a - 1)) continue;  // delta halves only when the knot spacing does
    auto rate = [&](const char* interp, double ea, double eb, double lo, double hi) {
      const double ratio = eb > 0.0 ? ea / eb : std::numeric_limits<double>::infinity();
      out.rates.push_back({interp, a, b, ratio, lo, hi, ratio >= lo && ratio <= hi});
    };
    rate("linear", lin_err[k], lin_err[k + 1], 1.6, 2.6);
    rate("hermite", herm_err[k], herm_err[k + 1], 3.0, 5.0);
  }
  return out;
}

std::string bounds_to_json(const BoundVerification& v) {
  json bounds = json::array(), rates = json::array();
  for (const BoundRecord& b : v.bounds)
    bounds.push_back({{"theorem", b.theorem},
                      {"interpolant", b.interpolant},
                      {"points", b.points},
                      {"delta", b.delta},
                      {"const_g", b.const_g},
                      {"const_hat", b.const_hat},
                      {"sup_error", b.sup_error},
                      {"bound", b.bound},
                      {"pass", b.pass}});
  for (const RateRecord& r : v.rates)
    rates.push_back({{"interpolant", r.interpolant},
                     {"from_points", r.from_points},
                     {"to_points", r.to_points},
                     {"ratio", r.ratio},
                     {"band", {r.lo, r.hi}},
                     {"pass", r.pass}});
  const json j = {{"reference", v.reference},
                  {"bounds", bounds},
                  {"rates", rates},
                  {"bounds_pass", v.bounds_pass()},
                  {"rates_pass", v.rates_pass()}};
  return j.dump(1) + "\n";
}

std::string bounds_to_csv(const BoundVerification& v) {
  std::ostringstream out;
  out.precision(17);
  out << "theorem,interpolant,points,delta,const_g,const_hat,sup_error,bound,pass\n";
  for (const BoundRecord& b : v.bounds)
    out << b.theorem << ',' << b.interpolant << ',' << b.points << ',' << b.delta << ',' << b.const_g << ','
        << b.const_hat << ',' << b.sup_error << ',' << b.bound << ',' << (b.pass ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace sobolev
