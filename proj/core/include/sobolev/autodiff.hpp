#pragma once

// Forward-mode scalar differentiation.
//
// `Dual` carries a value and a vector of directional derivatives (one per
// seeded direction); a Dual with an empty derivative vector is a constant.
// `HyperDual` carries two first-order seeds and their cross term, which is
// enough for one exact entry of a Hessian per evaluation.
//
// Functions to be differentiated are written once as generic callables taking
// `std::span<const T>` and returning `T` (or `std::vector<T>`), and are then
// evaluated with T = double, Dual, or HyperDual.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sobolev::ad {

class Dual {
 public:
  Dual() = default;
  // NOLINTNEXTLINE(google-explicit-constructor): constants mix freely.
  Dual(double value) : value_(value) {}
  Dual(double value, std::vector<double> deriv) : value_(value), deriv_(std::move(deriv)) {}

  /// Independent variable seeded along unit direction `index` of `directions`.
  static Dual variable(double value, std::size_t index, std::size_t directions) {
    std::vector<double> d(directions, 0.0);
    d.at(index) = 1.0;
    return {value, std::move(d)};
  }

  double value() const { return value_; }
  const std::vector<double>& deriv() const { return deriv_; }
  std::size_t directions() const { return deriv_.size(); }
  double deriv(std::size_t i) const { return i < deriv_.size() ? deriv_[i] : 0.0; }

  // Result of applying a scalar map with derivative `slope` at value().
  Dual chain(double value, double slope) const {
    std::vector<double> d(deriv_.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = slope * deriv_[i];
    return {value, std::move(d)};
  }

  // ca * a' + cb * b'
  static Dual combine(double value, double ca, const Dual& a, double cb, const Dual& b) {
    const std::size_t n = std::max(a.deriv_.size(), b.deriv_.size());
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < a.deriv_.size(); ++i) d[i] += ca * a.deriv_[i];
    for (std::size_t i = 0; i < b.deriv_.size(); ++i) d[i] += cb * b.deriv_[i];
    return {value, std::move(d)};
  }

  Dual& operator+=(const Dual& o) { return *this = combine(value_ + o.value_, 1.0, *this, 1.0, o); }
  Dual& operator-=(const Dual& o) { return *this = combine(value_ - o.value_, 1.0, *this, -1.0, o); }
  Dual& operator*=(const Dual& o) {
    return *this = combine(value_ * o.value_, o.value_, *this, value_, o);
  }
  Dual& operator/=(const Dual& o) {
    const double q = value_ / o.value_;
    return *this = combine(q, 1.0 / o.value_, *this, -q / o.value_, o);
  }

 private:
  double value_ = 0.0;
  std::vector<double> deriv_;
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return a.chain(-a.value(), -1.0); }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.value() < b.value(); }
inline bool operator>(const Dual& a, const Dual& b) { return a.value() > b.value(); }
inline bool operator<=(const Dual& a, const Dual& b) { return a.value() <= b.value(); }
inline bool operator>=(const Dual& a, const Dual& b) { return a.value() >= b.value(); }

/// Value, first seeds (d1, d2) and the mixed second derivative d12.
struct HyperDual {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d12 = 0.0;

  HyperDual() = default;
  // NOLINTNEXTLINE(google-explicit-constructor)
  HyperDual(double v) : value(v) {}
  HyperDual(double v, double a, double b, double ab) : value(v), d1(a), d2(b), d12(ab) {}

  // Applies a scalar map with first/second derivatives f1, f2 at value.
  HyperDual chain(double v, double f1, double f2) const {
    return {v, f1 * d1, f1 * d2, f1 * d12 + f2 * (d1 * d2)};
  }

  HyperDual& operator+=(const HyperDual& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    d12 += o.d12;
    return *this;
  }
  HyperDual& operator-=(const HyperDual& o) {
    value -= o.value;
    d1 -= o.d1;
    d2 -= o.d2;
    d12 -= o.d12;
    return *this;
  }
  HyperDual& operator*=(const HyperDual& o) {
    const HyperDual a = *this;
    value = a.value * o.value;
    d1 = a.value * o.d1 + a.d1 * o.value;
    d2 = a.value * o.d2 + a.d2 * o.value;
    d12 = (a.value * o.d12 + (a.d1 * o.d2 + a.d2 * o.d1)) + a.d12 * o.value;
    return *this;
  }
  HyperDual& operator/=(const HyperDual& o) {
    const double inv = 1.0 / o.value;
    return *this *= o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
  }
};

inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }
inline HyperDual operator-(const HyperDual& a) { return {-a.value, -a.d1, -a.d2, -a.d12}; }
inline HyperDual operator+(const HyperDual& a) { return a; }

inline bool operator<(const HyperDual& a, const HyperDual& b) { return a.value < b.value; }
inline bool operator>(const HyperDual& a, const HyperDual& b) { return a.value > b.value; }
inline bool operator<=(const HyperDual& a, const HyperDual& b) { return a.value <= b.value; }
inline bool operator>=(const HyperDual& a, const HyperDual& b) { return a.value >= b.value; }

// ---------------------------------------------------------------------------
// Primitives. Each has a double, Dual and HyperDual overload so generic code
// can call them unqualified after `using namespace sobolev::ad`.

namespace detail {
inline void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) throw std::domain_error(std::string(fn) + ": argument must be positive");
}
inline void require_nonnegative(double x, const char* fn) {
  if (!(x >= 0.0)) throw std::domain_error(std::string(fn) + ": argument must be non-negative");
}
}  // namespace detail

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }
inline double value_of(const HyperDual& x) { return x.value; }

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;
using std::tanh;

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value());
  return a.chain(e, e);
}
inline HyperDual exp(const HyperDual& a) {
  const double e = std::exp(a.value);
  return a.chain(e, e, e);
}

inline Dual log(const Dual& a) {
  detail::require_positive(a.value(), "log");
  return a.chain(std::log(a.value()), 1.0 / a.value());
}
inline HyperDual log(const HyperDual& a) {
  detail::require_positive(a.value, "log");
  return a.chain(std::log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value));
}

inline Dual sin(const Dual& a) { return a.chain(std::sin(a.value()), std::cos(a.value())); }
inline HyperDual sin(const HyperDual& a) {
  const double s = std::sin(a.value);
  return a.chain(s, std::cos(a.value), -s);
}

inline Dual cos(const Dual& a) { return a.chain(std::cos(a.value()), -std::sin(a.value())); }
inline HyperDual cos(const HyperDual& a) {
  const double c = std::cos(a.value);
  return a.chain(c, -std::sin(a.value), -c);
}

inline Dual sqrt(const Dual& a) {
  detail::require_nonnegative(a.value(), "sqrt");
  const double r = std::sqrt(a.value());
  return a.chain(r, 0.5 / r);
}
inline HyperDual sqrt(const HyperDual& a) {
  detail::require_nonnegative(a.value, "sqrt");
  const double r = std::sqrt(a.value);
  return a.chain(r, 0.5 / r, -0.25 / (r * a.value));
}

inline Dual pow(const Dual& a, double k) {
  if (k == 0.0) return Dual(1.0);
  return a.chain(std::pow(a.value(), k), k * std::pow(a.value(), k - 1.0));
}
inline HyperDual pow(const HyperDual& a, double k) {
  if (k == 0.0) return HyperDual(1.0);
  return a.chain(std::pow(a.value, k), k * std::pow(a.value, k - 1.0),
                 k * (k - 1.0) * std::pow(a.value, k - 2.0));
}
// General power through exp/log; base must be positive.
inline Dual pow(const Dual& a, const Dual& b) { return Dual(std::pow(a.value(), b.value()), exp(b * log(a)).deriv()); }
inline HyperDual pow(const HyperDual& a, const HyperDual& b) {
  HyperDual r = exp(b * log(a));
  r.value = std::pow(a.value, b.value);
  return r;
}

inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.value());
  return a.chain(t, 1.0 - t * t);
}
inline HyperDual tanh(const HyperDual& a) {
  const double t = std::tanh(a.value);
  const double s = 1.0 - t * t;
  return a.chain(t, s, -2.0 * t * s);
}

// max(x, c) with derivative 0 at the kink.
inline double max(double a, double c) { return a > c ? a : c; }
inline Dual max(const Dual& a, double c) { return a.value() > c ? a : Dual(c); }
inline HyperDual max(const HyperDual& a, double c) { return a.value > c ? a : HyperDual(c); }
template <class T>
T max(double c, const T& a) {
  return max(a, c);
}

template <class T>
T square(const T& a) {
  return a * a;
}

// ---------------------------------------------------------------------------
// Drivers.

/// Gradient of a scalar generic callable `f(std::span<const T>) -> T` at x.
template <class F>
Eigen::VectorXd gradient(F&& f, const Eigen::VectorXd& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<Dual> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(Dual::variable(x[static_cast<Eigen::Index>(i)], i, n));
  const Dual y = f(std::span<const Dual>(xs));
  Eigen::VectorXd g(x.size());
  for (std::size_t i = 0; i < n; ++i) g[static_cast<Eigen::Index>(i)] = y.deriv(i);
  return g;
}

/// Jacobian (rows = outputs) of `f(std::span<const T>) -> std::vector<T>`.
template <class F>
Eigen::MatrixXd jacobian(F&& f, const Eigen::VectorXd& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<Dual> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(Dual::variable(x[static_cast<Eigen::Index>(i)], i, n));
  const std::vector<Dual> ys = f(std::span<const Dual>(xs));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ys.size()), x.size());
  for (std::size_t r = 0; r < ys.size(); ++r)
    for (std::size_t c = 0; c < n; ++c)
      J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ys[r].deriv(c);
  return J;
}

/// Mixed second derivative d^2 f / dx_i dx_j from one hyper-dual evaluation.
template <class F>
double second_partial(F&& f, const Eigen::VectorXd& x, Eigen::Index i, Eigen::Index j) {
  std::vector<HyperDual> xs(static_cast<std::size_t>(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k)
    xs[static_cast<std::size_t>(k)] = HyperDual(x[k], k == i ? 1.0 : 0.0, k == j ? 1.0 : 0.0, 0.0);
  return f(std::span<const HyperDual>(xs)).d12;
}

/// Hessian of a scalar generic callable; one hyper-dual pass per upper entry.
template <class F>
Eigen::MatrixXd hessian(F&& f, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      H(i, j) = second_partial(f, x, i, j);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

}  // namespace sobolev::ad
