#include "sobolev/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "sobolev/parallel.hpp"
#include "sobolev/random.hpp"
#include "sobolev/solver.hpp"

namespace sobolev {

int mask_kept_count(int n, int d, double sparsity) {
  const double total = static_cast<double>(n) * d;
  return std::max(1, static_cast<int>(std::lround((1.0 - sparsity) * total)));
}

MaskSpec sample_mask(int n, int d, double sparsity, std::uint64_t seed) {
  if (n <= 0 || d <= 0) throw std::invalid_argument("sample_mask: n and d must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw std::invalid_argument("sample_mask: sparsity must be in [0, 1)");
  const int total = n * d;
  const int keep = std::min(total, mask_kept_count(n, d, sparsity));
  std::vector<int> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first `keep` slots are a uniform subset.
  for (int i = 0; i < keep; ++i) {
    const auto j = static_cast<std::size_t>(i) + uniform_index(rng, static_cast<std::uint64_t>(total - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(keep));
  std::sort(idx.begin(), idx.end());
  MaskSpec mask;
  mask.sparsity = sparsity;
  for (int k : idx) mask.kept_entries.emplace_back(k / d, k % d);
  return mask;
}

std::array<int, 3> strategy_counts(int count, const SamplingProportions& pr) {
  if (!(pr.box >= 0.0 && pr.line >= 0.0 && pr.distribution >= 0.0) ||
      std::abs(pr.box + pr.line + pr.distribution - 1.0) > 1e-9)
    throw std::invalid_argument("sampling proportions must be nonnegative and sum to 1");
  int box = static_cast<int>(std::lround(count * pr.box));
  int line = static_cast<int>(std::lround(count * pr.line));
  box = std::min(box, count);
  line = std::min(line, count - box);
  int dist = count - box - line;
  if (pr.distribution == 0.0 && dist > 0) {
    // Rounding slack goes to a strategy that was asked for.
    (pr.box > 0.0 ? box : line) += dist;
    dist = 0;
  }
  return {box, line, dist};
}

std::vector<ParameterSample> sample_parameters_tagged(const ParametricProblem& problem, int count,
                                                      const SamplingProportions& proportions,
                                                      std::uint64_t seed) {
  if (count <= 0) throw std::invalid_argument("sample_parameters: count must be positive");
  const auto [nbox, nline, ndist] = strategy_counts(count, proportions);
  const Eigen::VectorXd& lo = problem.param_lower();
  const Eigen::VectorXd& hi = problem.param_upper();
  const int d = problem.d();
  Rng rng(seed);
  auto box_point = [&] {
    Eigen::VectorXd p(d);
    for (int k = 0; k < d; ++k) p[k] = uniform(rng, lo[k], hi[k]);
    return p;
  };

  std::vector<ParameterSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < nbox; ++i) out.push_back({box_point(), SampleStrategy::box});

  for (int done = 0; done < nline;) {
    const int len = std::min(kLinePoints, nline - done);
    const Eigen::VectorXd base = box_point();
    const auto k = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(d)));
    for (int j = 0; j < len; ++j) {
      Eigen::VectorXd p = base;
      if (len > 1) p[k] = lo[k] + (hi[k] - lo[k]) * j / (len - 1);
      out.push_back({p, SampleStrategy::line});
    }
    done += len;
  }

  const Eigen::VectorXd ref = problem.reference_parameter();
  const auto [slo, shi] = problem.distribution_scale_range();
  for (int i = 0; i < ndist; ++i) {
    const double s = uniform(rng, slo, shi);
    out.push_back({(s * ref).cwiseMax(lo).cwiseMin(hi), SampleStrategy::distribution});
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_parameters(const ParametricProblem& problem, int count,
                                               const SamplingProportions& proportions, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> out;
  for (auto& s : sample_parameters_tagged(problem, count, proportions, seed)) out.push_back(std::move(s.p));
  return out;
}

std::optional<SolutionRecord> make_record(const ParametricProblem& problem, const Eigen::VectorXd& p,
                                          double sparsity, std::uint64_t mask_seed, double solver_tol) {
  SolverOptions opt;
  opt.tol = solver_tol;
  const SolverResult sol = solve(problem, p, opt);
  if (sol.status != SolverStatus::converged) return std::nullopt;

  SolutionRecord rec;
  rec.p = p;
  rec.x_star = sol.x_star;
  rec.lambda.resize(sol.lambda_eq.size() + sol.lambda_ineq.size());
  rec.lambda << sol.lambda_eq, sol.lambda_ineq;
  rec.objective = sol.objective;
  rec.mask = sample_mask(problem.n(), problem.d(), sparsity, mask_seed);

  const SensitivityResult sens = kkt_sensitivity(problem, p, sol);
  rec.regularity = to_string(sens.status);
  if (sens.status == SensitivityStatus::regular)
    for (const auto& [r, c] : rec.mask.kept_entries) rec.jac_entries.push_back({r, c, sens.dx_dp(r, c)});
  return rec;
}

Dataset build_split(const ParametricProblem& problem, const std::string& split, int count,
                    const GenerationConfig& config, int threads) {
  if (count < 0) throw std::invalid_argument("split count must be >= 0");
  Dataset ds;
  ds.problem_name = problem.name();
  ds.n = problem.n();
  ds.d = problem.d();
  ds.split = split;
  ds.config = config;
  ds.stats.requested = count;
  if (count == 0) return ds;

  const std::uint64_t split_id = split == "train" ? 0 : split == "val" ? 1 : 2;
  const std::uint64_t split_seed = derive_seed(config.seed, split_id);
  const auto params = sample_parameters(problem, count, config.proportions, split_seed);

  std::vector<std::optional<SolutionRecord>> slots(params.size());
  parallel_for(params.size(), threads, [&](std::size_t i) {
    slots[i] = make_record(problem, params[i], config.sparsity, derive_seed(split_seed, i), config.solver_tol);
  });
  for (auto& s : slots) {
    if (!s) {
      ++ds.stats.solver_failures;
      continue;
    }
    if (!s->regular()) ++ds.stats.degenerate;
    ds.records.push_back(std::move(*s));
  }
  return ds;
}

DatasetTriple build_dataset(const ParametricProblem& problem, const GenerationConfig& config, int threads) {
  return {build_split(problem, "train", config.counts.train, config, threads),
          build_split(problem, "val", config.counts.val, config, threads),
          build_split(problem, "test", config.counts.test, config, threads)};
}

Eigen::MatrixXd jacobian_from_entries(const SolutionRecord& record, int n, int d) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, d);
  for (const JacEntry& e : record.jac_entries) J(e.row, e.col) = e.value;
  return J;
}

}  // namespace sobolev
