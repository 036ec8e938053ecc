#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sobolev/datagen.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/proxy.hpp"

namespace sobolev {

// Per-record losses; thin views over record_loss.
double value_loss(const ProxyModel& model, const SolutionRecord& record);
/// Falls back to value_loss for records without Jacobian entries.
double sobolev_loss(const ProxyModel& model, const SolutionRecord& record, double lambda);
double selfsup_loss(const ProxyModel& model, const PenalizedProblem& pen, const Eigen::VectorXd& p);
double selfsup_sobolev_loss(const ProxyModel& model, const SolutionRecord& record, const PenalizedProblem& pen,
                            double lambda);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  LossMode mode = LossMode::value;
  double lambda = 0.0;
  int epochs = 100;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double penalty_beta = 100.0;
  double penalty_gamma = 100.0;
  int val_every = 1;  // validation MSE every k epochs and after the last one
  // Architecture used when train() builds the initial model.
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::tanh;
  bool projection = false;  // Markowitz problems only
  int threads = 1;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

struct EpochLoss {
  int epoch = 0;  // 1-based
  double value = 0.0;
  double jacobian = 0.0;
  double total = 0.0;
};

struct ValPoint {
  int epoch = 0;  // 0 is the initial model
  double mse = 0.0;
};

struct TrainReport {
  std::vector<EpochLoss> train;
  std::vector<ValPoint> val;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct TrainResult {
  ProxyModel model;
  TrainReport report;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Initial model for `problem` from config.hidden/activation/projection,
/// seeded by derive_seed(config.seed, 0).
ProxyModel initial_model(const ParametricProblem& problem, const TrainConfig& config);

/// Mean value MSE of model.forward over the records (0 for an empty list).
double dataset_mse(const ProxyModel& model, const std::vector<SolutionRecord>& records);

/// Adam on minibatches; batch order is shuffled each epoch from
/// derive_seed(config.seed, 1). `problem` supplies the penalty for the
/// self-supervised modes. Throws TrainingDiverged when a batch loss becomes
/// non-finite and std::invalid_argument on bad input.
TrainResult train(ProxyModel model, const ParametricProblem& problem, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& config);
TrainResult train(const ParametricProblem& problem, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& config);

std::string train_config_to_json(const TrainConfig& config);
/// Fields missing from the JSON keep their value in `base`.
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});

std::string report_to_json(const TrainReport& report);
/// Columns: epoch,value,jacobian,total,val_mse (val_mse empty when not measured).
std::string report_to_csv(const TrainReport& report);

}  // namespace sobolev
