#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sobolev/problems.hpp"
#include "sobolev/sensitivity.hpp"

namespace sobolev {

/// Kept (row, col) entries of the n x d solution Jacobian.
struct MaskSpec {
  std::vector<std::pair<int, int>> kept_entries;  // row-major sorted, unique
  double sparsity = 0.0;

  bool operator==(const MaskSpec&) const = default;
};

/// round((1 - sparsity) n d), at least 1.
int mask_kept_count(int n, int d, double sparsity);

/// Uniform sample of kept entries without replacement, deterministic in seed.
/// Throws std::invalid_argument unless sparsity is in [0, 1) and n, d > 0.
MaskSpec sample_mask(int n, int d, double sparsity, std::uint64_t seed);

enum class SampleStrategy { box, line, distribution };

struct ParameterSample {
  Eigen::VectorXd p;
  SampleStrategy strategy = SampleStrategy::box;
};

/// Number of points in one line excursion; the final excursion may be shorter.
inline constexpr int kLinePoints = 11;

/// Per-strategy counts: box and line are rounded, distribution takes the rest.
std::array<int, 3> strategy_counts(int count, const SamplingProportions& proportions);

/// Box samples first, then line excursions, then distribution samples.
/// Throws std::invalid_argument for count <= 0 or invalid proportions.
std::vector<ParameterSample> sample_parameters_tagged(const ParametricProblem& problem, int count,
                                                      const SamplingProportions& proportions,
                                                      std::uint64_t seed);
std::vector<Eigen::VectorXd> sample_parameters(const ParametricProblem& problem, int count,
                                               const SamplingProportions& proportions, std::uint64_t seed);

struct JacEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;

  bool operator==(const JacEntry&) const = default;
};

struct SolutionRecord {
  Eigen::VectorXd p;
  Eigen::VectorXd x_star;
  Eigen::VectorXd lambda;  // equality multipliers, then inequality multipliers
  double objective = 0.0;
  MaskSpec mask;
  std::vector<JacEntry> jac_entries;  // on mask.kept_entries when regular, else empty
  std::string regularity = "regular";

  bool regular() const { return regularity == to_string(SensitivityStatus::regular); }
};

struct SplitCounts {
  int train = 512;
  int val = 128;
  int test = 128;
};

struct GenerationConfig {
  std::uint64_t seed = 0;
  SamplingProportions proportions;
  double sparsity = 0.0;
  SplitCounts counts;
  double solver_tol = 1e-10;
};

struct GenerationStats {
  int requested = 0;
  int solver_failures = 0;
  int degenerate = 0;  // kept without Jacobian entries
};

struct Dataset {
  std::string problem_name;
  int n = 0;
  int d = 0;
  std::string split = "train";
  GenerationConfig config;
  GenerationStats stats;
  std::vector<SolutionRecord> records;
};

struct DatasetTriple {
  Dataset train, val, test;
};

/// Solves, differentiates and masks one parameter; std::nullopt when the
/// solver does not converge.
std::optional<SolutionRecord> make_record(const ParametricProblem& problem, const Eigen::VectorXd& p,
                                          double sparsity, std::uint64_t mask_seed, double solver_tol);

/// Builds one split. Parameter samples come from derive_seed(seed, split_id)
/// and the mask of sample i from derive_seed(that seed, i), so the result does
/// not depend on `threads`.
Dataset build_split(const ParametricProblem& problem, const std::string& split, int count,
                    const GenerationConfig& config, int threads = 1);

DatasetTriple build_dataset(const ParametricProblem& problem, const GenerationConfig& config, int threads = 1);

/// Dense n x d Jacobian target with only the kept entries filled.
Eigen::MatrixXd jacobian_from_entries(const SolutionRecord& record, int n, int d);

// JSON Lines persistence: one header line, then one record per line.
std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(const std::string& text);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace sobolev
