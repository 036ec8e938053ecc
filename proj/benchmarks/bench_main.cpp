#include <benchmark/benchmark.h>

#include "sobolev/datagen.hpp"
#include "sobolev/proxy.hpp"
#include "sobolev/random.hpp"
#include "sobolev/sensitivity.hpp"
#include "sobolev/solver.hpp"

using namespace sobolev;

namespace {

const char* const kProblems[] = {"toy-qp-8", "markowitz-5", "markowitz-20", "acopf3"};

void BM_Solve(benchmark::State& state) {
  auto prob = make_problem(kProblems[state.range(0)]);
  const Eigen::VectorXd p = prob->reference_parameter();
  for (auto _ : state) benchmark::DoNotOptimize(solve(*prob, p));
  state.SetLabel(prob->name());
}
BENCHMARK(BM_Solve)->DenseRange(0, 3);

void BM_KktSensitivity(benchmark::State& state) {
  auto prob = make_problem(kProblems[state.range(0)]);
  Rng rng(3);
  Eigen::VectorXd p(prob->d());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = uniform(rng, prob->param_lower()[i], prob->param_upper()[i]);
  const SolverResult r = solve(*prob, p);
  for (auto _ : state) benchmark::DoNotOptimize(kkt_sensitivity(*prob, p, r));
  state.SetLabel(prob->name());
}
BENCHMARK(BM_KktSensitivity)->DenseRange(0, 3);

// Batch of 32 markowitz-20 records, two hidden layers of the given width.
void BM_LossAndGradient(benchmark::State& state) {
  auto prob = make_problem("markowitz-20");
  const auto mode = static_cast<LossMode>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  Rng rng(5);
  std::vector<SolutionRecord> recs(32);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    SolutionRecord& r = recs[i];
    r.p = prob->reference_parameter();
    r.x_star = Eigen::VectorXd::Constant(prob->n(), 0.05);
    r.mask = sample_mask(prob->n(), prob->d(), 0.9, derive_seed(7, i));
    for (const auto& [row, col] : r.mask.kept_entries) r.jac_entries.push_back({row, col, uniform(rng, -1.0, 1.0)});
  }
  std::vector<const SolutionRecord*> batch;
  for (const auto& r : recs) batch.push_back(&r);
  const ProxyModel model(prob->d(), {width, width}, prob->n(), Activation::tanh, 1);
  const LossSpec spec{mode, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(model, batch, spec));
  state.SetLabel(to_string(mode));
}
BENCHMARK(BM_LossAndGradient)
    ->ArgsProduct({{static_cast<long>(LossMode::value), static_cast<long>(LossMode::sobolev)}, {64, 256}});

void BM_BuildSplit(benchmark::State& state) {
  auto prob = make_problem("markowitz-5");
  GenerationConfig cfg;
  cfg.proportions = prob->default_proportions();
  cfg.sparsity = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(build_split(*prob, "train", 64, cfg));
}
BENCHMARK(BM_BuildSplit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
