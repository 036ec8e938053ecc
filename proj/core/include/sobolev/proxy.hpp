#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sobolev/datagen.hpp"
#include "sobolev/problems.hpp"

namespace sobolev {

enum class Activation { tanh, softplus, sigmoid, relu, leaky_relu };

std::string to_string(Activation a);
/// Accepts "tanh", "softplus", "sigmoid", "relu", "leaky_relu".
Activation activation_from_string(const std::string& name);
/// True for activations with a continuous second derivative.
bool is_smooth(Activation a);

/// sigma(z), sigma'(z), sigma''(z); relu-type kinks use derivative 0 at z = 0
/// from the left convention (z > 0 counts as the active side).
double activate(Activation a, double z);
double activate_d1(Activation a, double z);
double activate_d2(Activation a, double z);

/// Clip, budget-scale, risk-scale head for the portfolio family. The risk
/// level is read from the last parameter entry, p = (mu, sigma_max).
struct ProjectionHead {
  Eigen::MatrixXd sigma_half;  // L with Sigma = L L'
  double budget = 1.0;

  static ProjectionHead from(const MarkowitzInstance& inst) { return {inst.sigma_half, inst.budget}; }
};

Eigen::VectorXd project_portfolio(const ProjectionHead& head, const Eigen::VectorXd& x_raw, double sigma_max);
/// Jacobian of project_portfolio with respect to x_raw (n x n); one-sided at
/// the switching boundaries.
Eigen::MatrixXd project_portfolio_jacobian(const ProjectionHead& head, const Eigen::VectorXd& x_raw,
                                           double sigma_max);

/// Fully connected network R^d -> R^n with a shared hidden activation and an
/// affine output layer.
class ProxyModel {
 public:
  ProxyModel() = default;
  /// Xavier-uniform weights from `seed`, zero biases.
  ProxyModel(int input_dim, const std::vector<int>& hidden, int output_dim, Activation activation,
             std::uint64_t seed);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  int layers() const { return static_cast<int>(weights_.size()); }

  Eigen::MatrixXd& weight(int l) { return weights_.at(static_cast<std::size_t>(l)); }
  const Eigen::MatrixXd& weight(int l) const { return weights_.at(static_cast<std::size_t>(l)); }
  Eigen::VectorXd& bias(int l) { return biases_.at(static_cast<std::size_t>(l)); }
  const Eigen::VectorXd& bias(int l) const { return biases_.at(static_cast<std::size_t>(l)); }

  const std::optional<ProjectionHead>& projection() const { return projection_; }
  void set_projection(std::optional<ProjectionHead> head);

  /// Total weight and bias count; flat order is layer by layer, the weight
  /// matrix row-major, then the bias.
  int parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);

  /// Network output before the projection head.
  Eigen::VectorXd forward_raw(const Eigen::VectorXd& p) const;
  /// Network output with the projection head applied when present.
  Eigen::VectorXd forward(const Eigen::VectorXd& p) const;
  /// n x d Jacobian of forward_raw.
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& p) const;

 private:
  void check_input(const Eigen::VectorXd& p) const;

  std::vector<int> widths_;
  Activation activation_ = Activation::tanh;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  std::optional<ProjectionHead> projection_;
};

std::string model_to_json(const ProxyModel& model);
ProxyModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const ProxyModel& model);
ProxyModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Losses and exact parameter gradients.

enum class LossMode { value, sobolev, selfsup, selfsup_sobolev };

std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& name);
inline bool uses_jacobian(LossMode m) { return m == LossMode::sobolev || m == LossMode::selfsup_sobolev; }
inline bool is_selfsup(LossMode m) { return m == LossMode::selfsup || m == LossMode::selfsup_sobolev; }

struct LossTerms {
  double value = 0.0;     // batch mean of the value (or penalized objective) term
  double jacobian = 0.0;  // batch mean of the masked Jacobian term, before lambda
  double total = 0.0;     // value + lambda * jacobian
};

struct LossGradient {
  LossTerms loss;
  Eigen::VectorXd grad;  // d total / d theta in parameters() order
  std::vector<std::string> warnings;
};

struct LossSpec {
  LossMode mode = LossMode::value;
  double lambda = 0.0;
  const PenalizedProblem* penalty = nullptr;  // required for the self-supervised modes
};

/// Loss of one record (no averaging) with its gradient added into `grad`
/// (scaled by `weight`) when grad is non-null.
LossTerms record_loss(const ProxyModel& model, const SolutionRecord& record, const LossSpec& spec,
                      Eigen::VectorXd* grad = nullptr, double weight = 1.0);

/// Batch mean of record_loss and its exact gradient. Per-record work may run on
/// `threads` workers; the reduction is always in record order. With lambda = 0
/// or a non-Jacobian mode the tangent pass is skipped.
LossGradient loss_and_gradient(const ProxyModel& model, const std::vector<const SolutionRecord*>& batch,
                               const LossSpec& spec, int threads = 1);

}  // namespace sobolev
