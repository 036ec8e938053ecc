#include "sobolev/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/LU>

namespace sobolev {

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::converged:
      return "converged";
    case SolverStatus::max_iter:
      return "max_iter";
    case SolverStatus::numerical_failure:
      return "numerical_failure";
  }
  return "unknown";
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double kkt_residual_from(const FirstOrder& fo, const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_in) {
  const Eigen::VectorXd stat = fo.objective_grad + fo.eq_jac.transpose() * lam_eq + fo.ineq_jac.transpose() * lam_in;
  double r = inf_norm(stat);
  r = std::max(r, inf_norm(to_vector(fo.values.eq)));
  for (std::size_t i = 0; i < fo.values.ineq.size(); ++i) {
    const double c = fo.values.ineq[i];
    const double z = lam_in[static_cast<Eigen::Index>(i)];
    r = std::max({r, std::max(c, 0.0), std::abs(z * c), std::max(-z, 0.0)});
  }
  return r;
}

// Largest step in (0, 1] keeping v + a dv >= (1 - tau) v for v > 0.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double tau) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -tau * v[i] / dv[i]);
  return a;
}

struct Iterate {
  Eigen::VectorXd x, s, lam, z;
};

class InteriorPoint {
 public:
  InteriorPoint(const ParametricProblem& problem, const Eigen::VectorXd& p, const SolverOptions& opt)
      : prob_(problem), p_(p), opt_(opt), n_(problem.n()), me_(problem.m_eq()), mi_(problem.m_ineq()) {}

  SolverResult run() {
    Iterate it;
    it.x = opt_.x0 ? *opt_.x0 : prob_.initial_point();
    if (it.x.size() != n_) throw std::invalid_argument("solve: starting point has wrong dimension");
    {
      const auto v = prob_.evaluate(it.x, p_);
      it.s.resize(mi_);
      for (int i = 0; i < mi_; ++i) it.s[i] = std::max(-v.ineq[static_cast<std::size_t>(i)], 1e-2);
    }
    it.lam = Eigen::VectorXd::Constant(me_, 1e-2);
    it.z = Eigen::VectorXd::Constant(mi_, 1e-2);

    double mu = mi_ > 0 ? opt_.mu0 : 0.0;
    const double mu_floor = opt_.tol / 10.0;
    double nu = 1.0;  // l1 merit penalty
    int stalled = 0;

    SolverResult best;
    best.kkt_residual = std::numeric_limits<double>::infinity();
    best.status = SolverStatus::max_iter;

    for (int iter = 0; iter <= opt_.max_iter; ++iter) {
      const FirstOrder fo = prob_.first_order(it.x, p_);
      const double kkt = kkt_residual_from(fo, it.lam, it.z);
      if (!std::isfinite(kkt)) return fail(best, iter);
      if (kkt < best.kkt_residual) record(best, it, fo, kkt, iter);
      if (kkt <= opt_.tol) {
        best.status = SolverStatus::converged;
        record(best, it, fo, kkt, iter);
        return best;
      }
      if (iter == opt_.max_iter) break;

      const Eigen::VectorXd cE = to_vector(fo.values.eq);
      const Eigen::VectorXd cI = to_vector(fo.values.ineq);
      Eigen::VectorXd r_d = fo.objective_grad + fo.eq_jac.transpose() * it.lam + fo.ineq_jac.transpose() * it.z;
      Eigen::VectorXd r_i = cI + it.s;

      // Monotone barrier update: leave the subproblem once it is solved to 10 mu.
      while (mi_ > 0 && mu > mu_floor) {
        const double e_mu = std::max({inf_norm(r_d), inf_norm(cE), inf_norm(r_i),
                                      inf_norm((it.s.array() * it.z.array() - mu).matrix())});
        if (e_mu > 10.0 * mu) break;
        mu = std::max(mu * opt_.mu_shrink, mu_floor);
      }

      const Eigen::MatrixXd W = prob_.lagrangian_hessian(it.x, p_, it.lam, it.z);
      Step step;
      if (!newton_step(it, fo, W, cE, r_d, r_i, mu, step)) return fail(best, iter);

      // Penalty large enough that the step is a descent direction.
      double mult = 0.0;
      if (me_ > 0) mult = std::max(mult, inf_norm(it.lam + step.dlam));
      if (mi_ > 0) mult = std::max(mult, inf_norm(it.z + step.dz));
      nu = std::max(nu, 1.1 * mult + 1e-8);

      const double a_max = mi_ > 0 ? max_step(it.s, step.ds, opt_.frac_to_boundary) : 1.0;
      const double a_z = mi_ > 0 ? max_step(it.z, step.dz, opt_.frac_to_boundary) : 1.0;

      const double phi0 = merit(fo.values.objective, cE, r_i, it.s, mu, nu);
      double slope = fo.objective_grad.dot(step.dx) - nu * (cE.lpNorm<1>() + r_i.lpNorm<1>());
      if (mi_ > 0) slope -= mu * (step.ds.array() / it.s.array()).sum();

      double a = a_max;
      bool accepted = false;
      for (int k = 0; k < 60; ++k) {
        const Eigen::VectorXd xt = it.x + a * step.dx;
        const Eigen::VectorXd st = it.s + a * step.ds;
        const auto vt = prob_.evaluate(xt, p_);
        const Eigen::VectorXd cEt = to_vector(vt.eq);
        const Eigen::VectorXd rit = to_vector(vt.ineq) + st;
        const double phi = merit(vt.objective, cEt, rit, st, mu, nu);
        if (std::isfinite(phi) && (slope >= 0.0 ? phi <= phi0 + 1e-12 * std::abs(phi0)
                                                : phi <= phi0 + opt_.sufficient_decrease * a * slope)) {
          accepted = true;
          break;
        }
        a *= opt_.backtrack;
        if (a < 1e-14) break;
      }
      if (!accepted) {
        // Non-monotone fallback: take the boundary-safe step and move on.
        a = a_max;
        if (++stalled > 10) return fail(best, iter);
      } else {
        stalled = 0;
      }

      it.x += a * step.dx;
      if (me_ > 0) it.lam += a * step.dlam;
      if (mi_ > 0) {
        it.s += a * step.ds;
        it.z += a_z * step.dz;
        // Keep z within a factor of the primal-dual central-path estimate.
        constexpr double kappa = 1e10;
        for (int i = 0; i < mi_; ++i) {
          const double c = std::max(mu, mu_floor) / it.s[i];
          it.z[i] = std::clamp(it.z[i], c / kappa, c * kappa);
        }
      }
    }
    best.status = SolverStatus::max_iter;
    best.iterations = opt_.max_iter;
    return best;
  }

 private:
  struct Step {
    Eigen::VectorXd dx, dlam, dz, ds;
  };

  double merit(double f, const Eigen::VectorXd& cE, const Eigen::VectorXd& r_i, const Eigen::VectorXd& s,
               double mu, double nu) const {
    double phi = f + nu * (cE.lpNorm<1>() + r_i.lpNorm<1>());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (!(s[i] > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= mu * std::log(s[i]);
    }
    return phi;
  }

  // Condensed primal-dual system after eliminating ds and dz:
  //   [ W + J_I' S^-1 Z J_I + dI   J_E' ] [dx  ]   [ -r_d - J_I' S^-1 (Z r_i - r_c) ]
  //   [ J_E                       -dcI  ] [dlam] = [ -cE                            ]
  // with r_c = S z - mu.
  bool newton_step(const Iterate& it, const FirstOrder& fo, const Eigen::MatrixXd& W, const Eigen::VectorXd& cE,
                   const Eigen::VectorXd& r_d, const Eigen::VectorXd& r_i, double mu, Step& out) const {
    const Eigen::MatrixXd& JE = fo.eq_jac;
    const Eigen::MatrixXd& JI = fo.ineq_jac;
    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(mi_);
    Eigen::VectorXd r_c = Eigen::VectorXd::Zero(mi_);
    if (mi_ > 0) {
      sigma = it.z.cwiseQuotient(it.s);
      r_c = (it.s.array() * it.z.array() - mu).matrix();
    }
    const Eigen::MatrixXd Hc = W + JI.transpose() * sigma.asDiagonal() * JI;
    Eigen::VectorXd rhs(n_ + me_);
    rhs.head(n_) = -r_d;
    if (mi_ > 0) rhs.head(n_) -= JI.transpose() * ((it.z.cwiseProduct(r_i) - r_c).cwiseQuotient(it.s));
    rhs.tail(me_) = -cE;

    double delta = opt_.reg_initial;
    double delta_c = 0.0;
    while (delta <= opt_.reg_max) {
      Eigen::MatrixXd K(n_ + me_, n_ + me_);
      K.topLeftCorner(n_, n_) = Hc + delta * Eigen::MatrixXd::Identity(n_, n_);
      K.topRightCorner(n_, me_) = JE.transpose();
      K.bottomLeftCorner(me_, n_) = JE;
      K.bottomRightCorner(me_, me_) = -delta_c * Eigen::MatrixXd::Identity(me_, me_);

      Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
      const Eigen::VectorXd sol = lu.solve(rhs);
      const bool solved = sol.allFinite() && lu.rcond() > 1e-15 &&
                          (K * sol - rhs).lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
      if (!solved) {
        delta = std::max(delta * opt_.reg_growth, 1e-8);
        delta_c = 1e-8;
        continue;
      }
      const Eigen::VectorXd dx = sol.head(n_);
      // Curvature test: the condensed Hessian must be positive along dx,
      // otherwise convexify and retry.
      const double curv = dx.dot(K.topLeftCorner(n_, n_) * dx);
      if (curv < 1e-10 * dx.squaredNorm() && dx.squaredNorm() > 1e-28) {
        delta = std::max(delta * opt_.reg_growth, 1e-4);
        continue;
      }
      out.dx = dx;
      out.dlam = sol.tail(me_);
      if (mi_ > 0) {
        out.ds = -r_i - JI * dx;
        out.dz = (-r_c - it.z.cwiseProduct(out.ds)).cwiseQuotient(it.s);
      } else {
        out.ds.resize(0);
        out.dz.resize(0);
      }
      return true;
    }
    return false;
  }

  void record(SolverResult& best, const Iterate& it, const FirstOrder& fo, double kkt, int iter) const {
    best.x_star = it.x;
    best.lambda_eq = it.lam;
    best.lambda_ineq = it.z;
    best.objective = fo.values.objective;
    best.kkt_residual = kkt;
    best.iterations = iter;
  }

  SolverResult fail(SolverResult best, int iter) const {
    best.status = SolverStatus::numerical_failure;
    best.iterations = iter;
    if (best.x_star.size() == 0) {
      best.x_star = Eigen::VectorXd::Constant(n_, std::numeric_limits<double>::quiet_NaN());
      best.lambda_eq = Eigen::VectorXd::Zero(me_);
      best.lambda_ineq = Eigen::VectorXd::Zero(mi_);
    }
    return best;
  }

  const ParametricProblem& prob_;
  const Eigen::VectorXd& p_;
  const SolverOptions& opt_;
  int n_, me_, mi_;
};

}  // namespace

double kkt_residual(const ParametricProblem& problem, const Eigen::VectorXd& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& lambda_eq, const Eigen::VectorXd& lambda_ineq) {
  if (lambda_eq.size() != problem.m_eq() || lambda_ineq.size() != problem.m_ineq())
    throw std::invalid_argument("kkt_residual: multiplier dimension mismatch");
  return kkt_residual_from(problem.first_order(x, p), lambda_eq, lambda_ineq);
}

SolverResult solve(const ParametricProblem& problem, const Eigen::VectorXd& p, const SolverOptions& options) {
  problem.check_dims(static_cast<std::size_t>(problem.n()), static_cast<std::size_t>(p.size()));
  if (!(options.tol > 0.0) || options.max_iter < 0 || !(options.mu_shrink > 0.0 && options.mu_shrink < 1.0) ||
      !(options.frac_to_boundary > 0.0 && options.frac_to_boundary < 1.0))
    throw std::invalid_argument("solve: invalid options");
  return InteriorPoint(problem, p, options).run();
}

}  // namespace sobolev
