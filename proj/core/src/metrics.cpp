#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "sobolev/eval.hpp"
#include "sobolev/parallel.hpp"

namespace sobolev {

using detail::json;

double mse(const Eigen::VectorXd& x_tilde, const Eigen::VectorXd& x_star) {
  if (x_tilde.size() != x_star.size() || x_star.size() == 0)
    throw std::invalid_argument("mse: vectors must be nonempty and of equal length");
  return (x_tilde - x_star).squaredNorm() / static_cast<double>(x_star.size());
}

std::optional<double> gap(double z_tilde, double z_star, double zero_tol) {
  if (std::abs(z_star) <= zero_tol) return std::nullopt;
  return std::abs(z_tilde - z_star) / std::abs(z_star);
}

Eigen::VectorXd constraint_violations(const ParametricProblem& problem, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& p) {
  const ProblemValues<double> v = problem.evaluate(x, p);
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.eq.size() + v.ineq.size()));
  Eigen::Index k = 0;
  for (double c : v.eq) out[k++] = std::abs(c);
  for (double c : v.ineq) out[k++] = std::max(c, 0.0);
  return out;
}

double inf_metric(const ParametricProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
  const Eigen::VectorXd v = constraint_violations(problem, x, p);
  return v.size() == 0 ? 0.0 : v.sum() / static_cast<double>(v.size());
}

std::optional<Eigen::VectorXd> rmi(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("rmi: infeasibility matrices must have the same shape");
  if (b.size() == 0 || a.cols() == 0) return std::nullopt;
  const double global = b.maxCoeff();
  if (!(global > 0.0)) return std::nullopt;
  return Eigen::VectorXd(100.0 * (a.rowwise().maxCoeff() - b.rowwise().maxCoeff()) / global);
}

double covering_radius(const std::vector<Eigen::VectorXd>& points, const std::vector<Eigen::VectorXd>& grid) {
  if (points.empty() || grid.empty()) throw std::invalid_argument("covering_radius: point sets must be nonempty");
  double radius = 0.0;
  for (const Eigen::VectorXd& q : grid) {
    double best = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& p : points) {
      if (p.size() != q.size()) throw std::invalid_argument("covering_radius: dimension mismatch");
      best = std::min(best, (p - q).squaredNorm());
    }
    radius = std::max(radius, best);
  }
  return std::sqrt(radius);
}

double estimate_lipschitz(const VectorMap& f,
                          const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs) {
  double best = 0.0;
  for (const auto& [p, q] : pairs) {
    const double dist = (p - q).norm();
    if (dist == 0.0) continue;
    best = std::max(best, (f(p) - f(q)).norm() / dist);
  }
  return best;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / s.count);
  std::sort(values.begin(), values.end());
  const auto mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

namespace {

void check_match(const ParametricProblem& problem, const ProxyModel& model, const Dataset& ds) {
  if (ds.n != problem.n() || ds.d != problem.d())
    throw std::invalid_argument("dataset dimensions do not match problem " + problem.name());
  if (model.input_dim() != problem.d() || model.output_dim() != problem.n())
    throw std::invalid_argument("model dimensions do not match problem " + problem.name());
}

}  // namespace

EvalReport evaluate(const ParametricProblem& problem, const ProxyModel& model, const Dataset& dataset,
                    int threads) {
  check_match(problem, model, dataset);
  EvalReport rep;
  rep.problem = problem.name();
  rep.instances.resize(dataset.records.size());
  parallel_for(dataset.records.size(), threads, [&](std::size_t i) {
    const SolutionRecord& r = dataset.records[i];
    const Eigen::VectorXd x = model.forward(r.p);
    InstanceMetrics& m = rep.instances[i];
    m.mse = mse(x, r.x_star);
    m.gap = gap(problem.evaluate(x, r.p).objective, r.objective, kGapZeroTol);
    m.inf = inf_metric(problem, x, r.p);
  });
  std::vector<double> mses, gaps, infs;
  for (const InstanceMetrics& m : rep.instances) {
    mses.push_back(m.mse);
    infs.push_back(m.inf);
    if (m.gap)
      gaps.push_back(*m.gap);
    else
      ++rep.gap_undefined;
  }
  rep.mse = summarize(mses);
  rep.gap = summarize(gaps);
  rep.inf = summarize(infs);
  return rep;
}

Eigen::MatrixXd violation_matrix(const ParametricProblem& problem, const ProxyModel& model, const Dataset& dataset,
                                 int threads) {
  check_match(problem, model, dataset);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dataset.records.size()), problem.m_eq() + problem.m_ineq());
  parallel_for(dataset.records.size(), threads, [&](std::size_t i) {
    const SolutionRecord& r = dataset.records[i];
    out.row(static_cast<Eigen::Index>(i)) = constraint_violations(problem, model.forward(r.p), r.p).transpose();
  });
  return out;
}

namespace {

json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"std", s.stddev}, {"count", s.count}};
}

}  // namespace

std::string eval_report_to_json(const EvalReport& rep) {
  json inst = json::array();
  for (const InstanceMetrics& m : rep.instances)
    inst.push_back({{"mse", m.mse}, {"gap", m.gap ? json(*m.gap) : json(nullptr)}, {"inf", m.inf}});
  const json j = {{"problem", rep.problem},
                  {"count", rep.instances.size()},
                  {"mse", summary_json(rep.mse)},
                  {"gap", summary_json(rep.gap)},
                  {"gap_undefined", rep.gap_undefined},
                  {"inf", summary_json(rep.inf)},
                  {"instances", inst}};
  return j.dump(1) + "\n";
}

std::string eval_report_to_csv(const EvalReport& rep) {
  std::ostringstream out;
  out.precision(17);
  out << "instance,mse,gap,inf\n";
  for (std::size_t i = 0; i < rep.instances.size(); ++i) {
    const InstanceMetrics& m = rep.instances[i];
    out << i << ',' << m.mse << ',';
    if (m.gap) out << *m.gap;
    out << ',' << m.inf << '\n';
  }
  return out.str();
}

}  // namespace sobolev
