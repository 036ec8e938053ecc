#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sobolev/datagen.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/proxy.hpp"
#include "sobolev/training.hpp"

namespace sobolev {

// ---------------------------------------------------------------------------
// Metrics

/// (1/n)||x_tilde - x_star||^2; throws std::invalid_argument on size mismatch.
double mse(const Eigen::VectorXd& x_tilde, const Eigen::VectorXd& x_star);

/// |z_tilde - z_star| / |z_star|; std::nullopt when |z_star| <= zero_tol.
std::optional<double> gap(double z_tilde, double z_star, double zero_tol = 0.0);

/// Optimal objectives at or below this magnitude are treated as 0 by evaluate();
/// a solver run to 1e-10 leaves round-off of this order where the exact value is 0.
inline constexpr double kGapZeroTol = 1e-12;

/// |cE| per equality, then max(cI, 0) per inequality (bounds folded into cI).
Eigen::VectorXd constraint_violations(const ParametricProblem& problem, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& p);
/// Mean of constraint_violations; 0 for a problem without constraints.
double inf_metric(const ParametricProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& p);

/// RMI_i = 100 (max_j A_ij - max_j B_ij) / max_ij B_ij, A the benchmark model
/// and B the Sobolev model (instances x constraints). std::nullopt when B is
/// all zero. Throws on shape mismatch.
std::optional<Eigen::VectorXd> rmi(const Eigen::MatrixXd& infeas_a, const Eigen::MatrixXd& infeas_b);

/// max over grid of the distance to the nearest point.
double covering_radius(const std::vector<Eigen::VectorXd>& points, const std::vector<Eigen::VectorXd>& grid);

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// max ||f(p) - f(q)|| / ||p - q|| over the pairs (pairs with p == q are skipped).
double estimate_lipschitz(const VectorMap& f, const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population standard deviation
  int count = 0;
};
Summary summarize(std::vector<double> values);

struct InstanceMetrics {
  double mse = 0.0;
  std::optional<double> gap;
  double inf = 0.0;
};

struct EvalReport {
  std::string problem;
  std::vector<InstanceMetrics> instances;
  Summary mse, gap, inf;  // gap over instances where it is defined
  int gap_undefined = 0;
};

/// Metrics of model.forward on every record. The objective of the prediction
/// is taken as is, without a feasibility repair.
EvalReport evaluate(const ParametricProblem& problem, const ProxyModel& model, const Dataset& dataset,
                    int threads = 1);

/// Per-record constraint violations of the model's predictions (records x constraints).
Eigen::MatrixXd violation_matrix(const ParametricProblem& problem, const ProxyModel& model, const Dataset& dataset,
                                 int threads = 1);

std::string eval_report_to_json(const EvalReport& report);
/// Columns: instance,mse,gap,inf (gap empty when undefined).
std::string eval_report_to_csv(const EvalReport& report);

// ---------------------------------------------------------------------------
// Bound verification on one-dimensional reference maps

struct ScalarReference {
  std::string name = "sin";
  std::function<double(double)> f = [](double x) { return std::sin(x); };
  std::function<double(double)> df = [](double x) { return std::cos(x); };
  double lo = 0.0;
  double hi = 6.283185307179586;
};

/// Piecewise-linear (value matching) and piecewise-cubic Hermite (value and
/// derivative matching) interpolants through equispaced knots.
class Interpolant1D {
 public:
  enum class Kind { linear, hermite };

  Interpolant1D(Kind kind, std::vector<double> knots, std::vector<double> values, std::vector<double> slopes = {});

  double value(double x) const;
  double derivative(double x) const;
  Kind kind() const { return kind_; }

 private:
  std::size_t segment(double x) const;

  Kind kind_;
  std::vector<double> t_, y_, m_;
};

struct BoundRecord {
  std::string theorem;      // "value", "jacobian" or "sobolev"
  std::string interpolant;  // "linear" or "hermite"
  int points = 0;
  double delta = 0.0;
  double const_g = 0.0;    // L_g or M_g
  double const_hat = 0.0;  // L of the interpolant or M of its derivative
  double sup_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct RateRecord {
  std::string interpolant;
  int from_points = 0, to_points = 0;
  double ratio = 0.0;  // sup error at from / sup error at to
  double lo = 0.0, hi = 0.0;
  bool pass = false;
};

struct BoundOptions {
  std::vector<int> points = {5, 9, 17, 33};
  int grid = 4096;
  int pairs = 100000;  // Lipschitz pairs: adjacent dense-grid pairs topped up with random pairs
  std::uint64_t seed = 0;
};

struct BoundVerification {
  std::string reference;
  std::vector<BoundRecord> bounds;
  std::vector<RateRecord> rates;  // consecutive entries of points whose delta halves

  bool bounds_pass() const;
  bool rates_pass() const;
};

/// Throws std::invalid_argument for fewer than 2 points or a grid below 2.
BoundVerification verify_bounds(const ScalarReference& g, const BoundOptions& options = {});

std::string bounds_to_json(const BoundVerification& v);
std::string bounds_to_csv(const BoundVerification& v);

// ---------------------------------------------------------------------------
// Mask-sparsity ablation

struct AblationRow {
  double sparsity = 0.0;
  double kept_fraction = 1.0;
  int kept_entries = 0;  // per record
  double test_mse = 0.0;
};

/// Retrains from config.seed once per sparsity with masks resampled from the
/// stored Jacobian entries. A record whose stored entries are fewer than the
/// requested count raises std::invalid_argument (generate with sparsity 0).
/// Non-Jacobian modes are trained as sobolev.
std::vector<AblationRow> ablate_mask(const ParametricProblem& problem, const Dataset& train_set,
                                     const Dataset& test_set, const std::vector<double>& sparsities,
                                     const TrainConfig& config);

/// The training records with masks resampled at `sparsity`.
Dataset remask(const Dataset& dataset, double sparsity, std::uint64_t seed);

std::string ablation_to_csv(const std::vector<AblationRow>& rows);

}  // namespace sobolev
