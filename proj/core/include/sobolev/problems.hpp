#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sobolev/autodiff.hpp"

namespace sobolev {

/// Objective, equality residuals (should be 0) and inequality values
/// (should be <= 0) of a problem at one (x, p).
template <class T>
struct ProblemValues {
  T objective{};
  std::vector<T> eq;
  std::vector<T> ineq;
};

/// Mix of parameter-sampling strategies; components sum to 1.
struct SamplingProportions {
  double box = 1.0;
  double line = 0.0;
  double distribution = 0.0;
};

/// A finite variable bound folded into the inequality block.
struct BoundRow {
  int variable = 0;
  bool lower = true;
  double value = 0.0;
};

/// Derivatives with respect to x of every problem function at one point.
struct FirstOrder {
  ProblemValues<double> values;
  Eigen::VectorXd objective_grad;  // n
  Eigen::MatrixXd eq_jac;          // mE x n
  Eigen::MatrixXd ineq_jac;        // mI x n
};

/// Derivatives with respect to the joint vector (x, p).
struct JointFirstOrder {
  ProblemValues<double> values;
  Eigen::VectorXd objective_grad;  // n + d
  Eigen::MatrixXd eq_jac;          // mE x (n + d)
  Eigen::MatrixXd ineq_jac;        // mI x (n + d)
};

/// min f(x;p) s.t. cE(x;p) = 0, cI(x;p) <= 0, lb <= x <= ub.
///
/// Subclasses describe the model constraints; finite variable bounds are
/// appended to the inequality block as `lb - x <= 0` / `x - ub <= 0` rows, so
/// the solver and metrics see a single inequality mechanism. Native
/// inequalities come first, then bound rows in variable order (lower before
/// upper).
class ParametricProblem {
 public:
  virtual ~ParametricProblem() = default;

  virtual std::string name() const = 0;

  int n() const { return n_; }
  int d() const { return d_; }
  int m_eq() const { return m_eq_; }
  int m_ineq() const { return m_native_ineq_ + static_cast<int>(bound_rows_.size()); }
  int native_ineq_count() const { return m_native_ineq_; }

  const Eigen::VectorXd& lower_bounds() const { return lower_; }
  const Eigen::VectorXd& upper_bounds() const { return upper_; }
  const Eigen::VectorXd& param_lower() const { return param_lower_; }
  const Eigen::VectorXd& param_upper() const { return param_upper_; }
  const std::vector<BoundRow>& bound_rows() const { return bound_rows_; }

  /// Anchor for distribution sampling; defaults to the box midpoint.
  virtual Eigen::VectorXd reference_parameter() const { return 0.5 * (param_lower_ + param_upper_); }
  /// Range of the global factor applied to the reference parameter.
  virtual std::pair<double, double> distribution_scale_range() const { return {0.8, 1.2}; }
  virtual SamplingProportions default_proportions() const { return {0.8, 0.2, 0.0}; }

  /// Midpoint of finite bounds, the finite bound when only one side is
  /// finite, 0 when unbounded.
  Eigen::VectorXd initial_point() const;

  /// Full evaluation (bound rows included). Throws std::invalid_argument on
  /// dimension mismatch.
  ProblemValues<double> evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;

  template <class T>
  ProblemValues<T> evaluate_as(std::span<const T> x, std::span<const T> p) const {
    check_dims(x.size(), p.size());
    ProblemValues<T> out;
    out.eq.reserve(static_cast<std::size_t>(m_eq_));
    out.ineq.reserve(static_cast<std::size_t>(m_ineq()));
    model(x, p, out);
    if (static_cast<int>(out.eq.size()) != m_eq_ || static_cast<int>(out.ineq.size()) != m_native_ineq_)
      throw std::logic_error(name() + ": model produced wrong constraint counts");
    for (const BoundRow& b : bound_rows_) {
      const T& xi = x[static_cast<std::size_t>(b.variable)];
      out.ineq.push_back(b.lower ? T(b.value) - xi : xi - T(b.value));
    }
    return out;
  }

  FirstOrder first_order(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;
  JointFirstOrder joint_first_order(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;

  /// Hessian of f + lam_eq . cE + lam_ineq . cI with respect to x (n x n),
  /// or with respect to (x, p) when `with_params` is set.
  Eigen::MatrixXd lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_ineq,
                                     bool with_params = false) const;

  void check_dims(std::size_t nx, std::size_t np) const;

 protected:
  ParametricProblem(int n, int d, int m_eq, int m_native_ineq, Eigen::VectorXd lower,
                    Eigen::VectorXd upper, Eigen::VectorXd param_lower, Eigen::VectorXd param_upper);

  virtual void model(std::span<const double> x, std::span<const double> p,
                     ProblemValues<double>& out) const = 0;
  virtual void model(std::span<const ad::Dual> x, std::span<const ad::Dual> p,
                     ProblemValues<ad::Dual>& out) const = 0;
  virtual void model(std::span<const ad::HyperDual> x, std::span<const ad::HyperDual> p,
                     ProblemValues<ad::HyperDual>& out) const = 0;

 private:
  int n_;
  int d_;
  int m_eq_;
  int m_native_ineq_;
  Eigen::VectorXd lower_, upper_;
  Eigen::VectorXd param_lower_, param_upper_;
  std::vector<BoundRow> bound_rows_;
};

/// Implements the three scalar-type overloads of `model` by forwarding to
/// `Derived::template define<T>(x, p, out)`.
template <class Derived>
class ProblemModel : public ParametricProblem {
 protected:
  using ParametricProblem::ParametricProblem;

  void model(std::span<const double> x, std::span<const double> p,
             ProblemValues<double>& out) const final {
    static_cast<const Derived&>(*this).define(x, p, out);
  }
  void model(std::span<const ad::Dual> x, std::span<const ad::Dual> p,
             ProblemValues<ad::Dual>& out) const final {
    static_cast<const Derived&>(*this).define(x, p, out);
  }
  void model(std::span<const ad::HyperDual> x, std::span<const ad::HyperDual> p,
             ProblemValues<ad::HyperDual>& out) const final {
    static_cast<const Derived&>(*this).define(x, p, out);
  }
};

/// Problem built from a generic callable `fn(x, p, out)` templated on the
/// scalar type; used for ad-hoc instances in tests and examples.
template <class Fn>
class FunctionProblem final : public ProblemModel<FunctionProblem<Fn>> {
 public:
  struct Shape {
    std::string name;
    int n = 0;
    int d = 0;
    int m_eq = 0;
    int m_ineq = 0;
    Eigen::VectorXd lower, upper;
    Eigen::VectorXd param_lower, param_upper;
  };

  FunctionProblem(Shape shape, Fn fn)
      : ProblemModel<FunctionProblem<Fn>>(shape.n, shape.d, shape.m_eq, shape.m_ineq, shape.lower,
                                          shape.upper, shape.param_lower, shape.param_upper),
        name_(std::move(shape.name)),
        fn_(std::move(fn)) {}

  std::string name() const override { return name_; }

  template <class T>
  void define(std::span<const T> x, std::span<const T> p, ProblemValues<T>& out) const {
    fn_(x, p, out);
  }

 private:
  std::string name_;
  Fn fn_;
};

template <class Fn>
std::unique_ptr<ParametricProblem> make_function_problem(typename FunctionProblem<Fn>::Shape shape,
                                                         Fn fn) {
  return std::make_unique<FunctionProblem<Fn>>(std::move(shape), std::move(fn));
}

// ---------------------------------------------------------------------------
// Toy QP family: min 1/2 ||x - p||^2, optionally with x >= 0.

class ToyQp final : public ProblemModel<ToyQp> {
 public:
  ToyQp(int dim, bool nonnegative, double p_lo, double p_hi);

  std::string name() const override;
  SamplingProportions default_proportions() const override { return {0.8, 0.2, 0.0}; }

  template <class T>
  void define(std::span<const T> x, std::span<const T> p, ProblemValues<T>& out) const {
    T f(0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T r = x[i] - p[i];
      f += 0.5 * r * r;
    }
    out.objective = f;
  }

 private:
  int dim_;
};

// ---------------------------------------------------------------------------
// Markowitz portfolio: min -mu'x s.t. x'Sigma x <= sigma_max^2, 1'x <= B, x >= 0.
// Parameter vector p = (mu_1..mu_n, sigma_max).

struct MarkowitzInstance {
  Eigen::VectorXd mu_lower, mu_upper;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_half;  // lower Cholesky factor, sigma = L L'
  double budget = 1.0;
  double sigma_max_lower = 0.05;
  double sigma_max_upper = 0.25;

  /// Fills sigma_half from sigma; throws if sigma is not positive definite.
  static MarkowitzInstance make(Eigen::VectorXd mu_lower, Eigen::VectorXd mu_upper,
                                Eigen::MatrixXd sigma, double budget, double sigma_max_lower,
                                double sigma_max_upper);
  /// Deterministic n-asset instance: volatilities 0.15..0.30, correlation 0.3.
  static MarkowitzInstance standard(int assets);
};

class Markowitz final : public ProblemModel<Markowitz> {
 public:
  explicit Markowitz(MarkowitzInstance instance);

  std::string name() const override;
  const MarkowitzInstance& instance() const { return inst_; }
  int assets() const { return static_cast<int>(inst_.sigma.rows()); }

  /// Returns rising across the box with the asset index (the volatility order
  /// of the standard instance), sigma_max at its midpoint. The box midpoint
  /// itself gives equal returns and a non-unique optimum.
  Eigen::VectorXd reference_parameter() const override;

  /// Risk feasibility via the quadratic form x'Sigma x <= s^2.
  bool risk_feasible_quadratic(const Eigen::VectorXd& x, double sigma_max, double tol) const;
  /// Risk feasibility via the cone form ||L' x|| <= s.
  bool risk_feasible_cone(const Eigen::VectorXd& x, double sigma_max, double tol) const;

  template <class T>
  void define(std::span<const T> x, std::span<const T> p, ProblemValues<T>& out) const {
    const std::size_t n = x.size();
    T ret(0.0), risk(0.0), total(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ret += p[i] * x[i];
      total += x[i];
      T row(0.0);
      for (std::size_t j = 0; j < n; ++j)
        row += inst_.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
      risk += x[i] * row;
    }
    const T& smax = p[n];
    out.objective = -ret;
    out.ineq.push_back(risk - smax * smax);
    out.ineq.push_back(total - T(inst_.budget));
  }

 private:
  MarkowitzInstance inst_;
};

// ---------------------------------------------------------------------------
// 3-bus AC optimal power flow.
//
// Variables x = (vm[3], va[3], pg[2], qg[2]); parameters p = (pd[3], qd[3]).
// Equalities: slack angle, then active and reactive balance per bus.
// Native inequalities: |S_ij|^2 <= Smax^2 and |S_ji|^2 <= Smax^2 per branch.

struct AcBranch {
  int from = 0;
  int to = 0;
  std::complex<double> y;   // series admittance
  std::complex<double> yc;  // shunt admittance at each end
  double rate = 0.0;        // thermal limit on |S|
};

struct AcGenerator {
  int bus = 0;
  double pmin = 0.0, pmax = 0.0, qmin = 0.0, qmax = 0.0;
  double c2 = 0.0, c1 = 0.0;  // cost c2*pg^2 + c1*pg
};

struct AcOpf3Bus {
  static constexpr int kBuses = 3;
  static constexpr int kGenerators = 2;
  static constexpr int kBranches = 3;

  std::array<AcBranch, kBranches> branches;
  std::array<AcGenerator, kGenerators> generators;
  std::array<double, kBuses> vmin{}, vmax{};
  std::array<double, kBuses> pd_ref{}, qd_ref{};
  double demand_box = 0.2;  // parameter box is ref * (1 -/+ demand_box)
  int slack = 0;

  /// Slack + PV + PQ buses on a triangle, two quadratic-cost generators.
  static AcOpf3Bus standard();
};

/// Complex flows at both ends of one branch, as (real, imag) pairs.
struct BranchFlow {
  std::complex<double> from_to;
  std::complex<double> to_from;
};

/// S_ij = (Y + Yc)* |V_i|^2 - Y* V_i V_j*, and symmetrically for S_ji.
template <class T>
std::array<T, 4> branch_flow(const AcBranch& br, const T& vi, const T& vj, const T& ti, const T& tj) {
  using namespace ad;
  const double g = br.y.real(), b = br.y.imag();
  const double gc = br.yc.real(), bc = br.yc.imag();
  const T dij = ti - tj;
  const T c = cos(dij);
  const T s = sin(dij);
  const T vivj = vi * vj;
  const T pij = (g + gc) * vi * vi - vivj * (g * c + b * s);
  const T qij = -(b + bc) * vi * vi - vivj * (g * s - b * c);
  // theta_ji = -theta_ij
  const T pji = (g + gc) * vj * vj - vivj * (g * c - b * s);
  const T qji = -(b + bc) * vj * vj - vivj * (-g * s - b * c);
  return {pij, qij, pji, qji};
}

class AcOpf final : public ProblemModel<AcOpf> {
 public:
  explicit AcOpf(AcOpf3Bus data);

  std::string name() const override { return "acopf3"; }
  const AcOpf3Bus& data() const { return data_; }

  Eigen::VectorXd reference_parameter() const override;
  std::pair<double, double> distribution_scale_range() const override { return {0.85, 1.15}; }
  SamplingProportions default_proportions() const override { return {0.6, 0.2, 0.2}; }

  static constexpr int vm_index(int bus) { return bus; }
  static constexpr int va_index(int bus) { return AcOpf3Bus::kBuses + bus; }
  static constexpr int pg_index(int gen) { return 2 * AcOpf3Bus::kBuses + gen; }
  static constexpr int qg_index(int gen) { return 2 * AcOpf3Bus::kBuses + AcOpf3Bus::kGenerators + gen; }

  template <class T>
  void define(std::span<const T> x, std::span<const T> p, ProblemValues<T>& out) const {
    constexpr int nb = AcOpf3Bus::kBuses;
    auto at = [&](int i) -> const T& { return x[static_cast<std::size_t>(i)]; };

    T cost(0.0);
    for (int g = 0; g < AcOpf3Bus::kGenerators; ++g) {
      const AcGenerator& gen = data_.generators[static_cast<std::size_t>(g)];
      const T& pg = at(pg_index(g));
      cost += gen.c2 * pg * pg + gen.c1 * pg;
    }
    out.objective = cost;

    std::array<T, nb> pbal, qbal;
    for (int i = 0; i < nb; ++i) {
      pbal[static_cast<std::size_t>(i)] = -p[static_cast<std::size_t>(i)];
      qbal[static_cast<std::size_t>(i)] = -p[static_cast<std::size_t>(nb + i)];
    }
    for (int g = 0; g < AcOpf3Bus::kGenerators; ++g) {
      const auto bus = static_cast<std::size_t>(data_.generators[static_cast<std::size_t>(g)].bus);
      pbal[bus] += at(pg_index(g));
      qbal[bus] += at(qg_index(g));
    }
    std::vector<T> thermal;
    thermal.reserve(2 * AcOpf3Bus::kBranches);
    for (const AcBranch& br : data_.branches) {
      const auto f = branch_flow<T>(br, at(vm_index(br.from)), at(vm_index(br.to)),
                                    at(va_index(br.from)), at(va_index(br.to)));
      const auto i = static_cast<std::size_t>(br.from), j = static_cast<std::size_t>(br.to);
      pbal[i] -= f[0];
      qbal[i] -= f[1];
      pbal[j] -= f[2];
      qbal[j] -= f[3];
      const double cap = br.rate * br.rate;
      thermal.push_back(f[0] * f[0] + f[1] * f[1] - T(cap));
      thermal.push_back(f[2] * f[2] + f[3] * f[3] - T(cap));
    }

    out.eq.push_back(at(va_index(data_.slack)));
    for (int i = 0; i < nb; ++i) out.eq.push_back(pbal[static_cast<std::size_t>(i)]);
    for (int i = 0; i < nb; ++i) out.eq.push_back(qbal[static_cast<std::size_t>(i)]);
    for (T& t : thermal) out.ineq.push_back(std::move(t));
  }

 private:
  AcOpf3Bus data_;
};

/// Flows on every branch at the given voltages. Throws std::invalid_argument
/// on dimension mismatch or non-positive magnitudes.
std::vector<BranchFlow> acopf_flows(const AcOpf3Bus& data, const Eigen::VectorXd& vm,
                                    const Eigen::VectorXd& va);

// ---------------------------------------------------------------------------
// Penalized objective used as the self-supervised training signal:
//   f + beta ||cE||^2 + gamma sum max(lb - x, 0) + beta sum max(cI, 0)^2
// where the last sum runs over native inequalities and upper-bound rows.

struct PenalizedProblem {
  const ParametricProblem* base = nullptr;
  double beta = 100.0;
  double gamma = 100.0;

  PenalizedProblem(const ParametricProblem& problem, double beta_weight, double gamma_weight);

  template <class T>
  T value(std::span<const T> x, std::span<const T> p) const {
    using namespace ad;
    const ProblemValues<T> v = base->evaluate_as<T>(x, p);
    T total = v.objective;
    for (const T& c : v.eq) total += beta * c * c;
    const int native = base->native_ineq_count();
    for (int i = 0; i < static_cast<int>(v.ineq.size()); ++i) {
      const T& c = v.ineq[static_cast<std::size_t>(i)];
      const bool lower_bound_row =
          i >= native && base->bound_rows()[static_cast<std::size_t>(i - native)].lower;
      if (lower_bound_row) {
        total += gamma * max(c, 0.0);
      } else {
        const T viol = max(c, 0.0);
        total += beta * viol * viol;
      }
    }
    return total;
  }
};

double penalized_objective(const PenalizedProblem& pen, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& p);
/// Gradient of the penalized objective with respect to x.
Eigen::VectorXd penalized_gradient(const PenalizedProblem& pen, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& p);

/// Builds a problem from its CLI name: `toy-qp`, `toy-qp-N`, `markowitz-N`,
/// `acopf3`. Throws std::invalid_argument for anything else.
std::unique_ptr<ParametricProblem> make_problem(std::string_view name);

}  // namespace sobolev
