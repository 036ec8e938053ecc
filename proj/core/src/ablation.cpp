#include <algorithm>
#include <sstream>
#include <tuple>
#include <stdexcept>

#include "sobolev/eval.hpp"
#include "sobolev/random.hpp"

namespace sobolev {

Dataset remask(const Dataset& dataset, double sparsity, std::uint64_t seed) {
  Dataset out = dataset;
  out.config.sparsity = sparsity;
  const int want = mask_kept_count(dataset.n, dataset.d, sparsity);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    SolutionRecord& r = out.records[i];
    if (!r.regular()) {
      r.mask = sample_mask(dataset.n, dataset.d, sparsity, derive_seed(seed, i));
      continue;
    }
    const auto stored = static_cast<int>(r.jac_entries.size());
    if (stored < want)
      throw std::invalid_argument("record " + std::to_string(i) + " stores " + std::to_string(stored) +
                                  " Jacobian entries but sparsity " + std::to_string(sparsity) + " needs " +
                                  std::to_string(want) + "; generate the dataset with --sparsity 0");
    // A uniform subset of the stored entries; with a full Jacobian stored this
    // is the same law as sample_mask.
    Rng rng(derive_seed(seed, i));
    std::vector<JacEntry> pool = r.jac_entries;
    for (int k = 0; k < want; ++k) {
      const auto j = static_cast<std::size_t>(k) + uniform_index(rng, static_cast<std::uint64_t>(stored - k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(want));
    std::sort(pool.begin(), pool.end(),
              [](const JacEntry& a, const JacEntry& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
    r.jac_entries = pool;
    r.mask.sparsity = sparsity;
    r.mask.kept_entries.clear();
    for (const JacEntry& e : pool) r.mask.kept_entries.emplace_back(e.row, e.col);
  }
  return out;
}

std::vector<AblationRow> ablate_mask(const ParametricProblem& problem, const Dataset& train_set,
                                     const Dataset& test_set, const std::vector<double>& sparsities,
                                     const TrainConfig& config) {
  TrainConfig cfg = config;
  if (!uses_jacobian(cfg.mode)) cfg.mode = LossMode::sobolev;
  cfg.validate();
  for (double s : sparsities)
    if (!(s >= 0.0 && s < 1.0)) throw std::invalid_argument("ablation sparsities must be in [0, 1)");

  std::vector<AblationRow> rows;
  const ProxyModel init = initial_model(problem, cfg);
  const double total = static_cast<double>(train_set.n) * train_set.d;
  for (double s : sparsities) {
    const Dataset masked = remask(train_set, s, derive_seed(cfg.seed, 2));
    const TrainResult res = train(init, problem, masked, nullptr, cfg);
    AblationRow row;
    row.sparsity = s;
    row.kept_entries = mask_kept_count(train_set.n, train_set.d, s);
    row.kept_fraction = row.kept_entries / total;
    row.test_mse = dataset_mse(res.model, test_set.records);
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "sparsity,kept_fraction,kept_entries,mse\n";
  for (const AblationRow& r : rows)
    out << r.sparsity << ',' << r.kept_fraction << ',' << r.kept_entries << ',' << r.test_mse << '\n';
  return out.str();
}

}  // namespace sobolev
