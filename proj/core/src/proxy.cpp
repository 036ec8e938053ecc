#include "sobolev/proxy.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "json_util.hpp"
#include "sobolev/parallel.hpp"
#include "sobolev/random.hpp"

namespace sobolev {

using detail::json;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::softplus:
      return "softplus";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::relu:
      return "relu";
    case Activation::leaky_relu:
      return "leaky_relu";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  for (auto a : {Activation::tanh, Activation::softplus, Activation::sigmoid, Activation::relu,
                 Activation::leaky_relu})
    if (to_string(a) == name) return a;
  throw std::invalid_argument("unknown activation '" + name + "' (tanh, softplus, sigmoid, relu, leaky_relu)");
}

bool is_smooth(Activation a) { return a != Activation::relu && a != Activation::leaky_relu; }

namespace {

constexpr double kLeak = 0.01;

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh:
      return std::tanh(z);
    case Activation::softplus:
      return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    case Activation::sigmoid:
      return logistic(z);
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::leaky_relu:
      return z > 0.0 ? z : kLeak * z;
  }
  return 0.0;
}

double activate_d1(Activation a, double z) {
  switch (a) {
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::softplus:
      return logistic(z);
    case Activation::sigmoid: {
      const double s = logistic(z);
      return s * (1.0 - s);
    }
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu:
      return z > 0.0 ? 1.0 : kLeak;
  }
  return 0.0;
}

double activate_d2(Activation a, double z) {
  switch (a) {
    case Activation::tanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::softplus: {
      const double s = logistic(z);
      return s * (1.0 - s);
    }
    case Activation::sigmoid: {
      const double s = logistic(z);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Activation::relu:
    case Activation::leaky_relu:
      return 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

ProxyModel::ProxyModel(int input_dim, const std::vector<int>& hidden, int output_dim, Activation activation,
                       std::uint64_t seed)
    : activation_(activation) {
  if (input_dim <= 0 || output_dim <= 0) throw std::invalid_argument("model dimensions must be positive");
  widths_.push_back(input_dim);
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
    widths_.push_back(h);
  }
  widths_.push_back(output_dim);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l], fan_out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd W(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) W(r, c) = uniform(rng, -limit, limit);
    weights_.push_back(std::move(W));
    biases_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

void ProxyModel::set_projection(std::optional<ProjectionHead> head) {
  if (head && (head->sigma_half.rows() != output_dim() || head->sigma_half.cols() != output_dim()))
    throw std::invalid_argument("projection head does not match the output dimension");
  projection_ = std::move(head);
}

int ProxyModel::parameter_count() const {
  int total = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    total += static_cast<int>(weights_[l].size() + biases_[l].size());
  return total;
}

Eigen::VectorXd ProxyModel::parameters() const {
  Eigen::VectorXd theta(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::MatrixXd& W = weights_[l];
    Eigen::Map<RowMajor>(theta.data() + k, W.rows(), W.cols()) = W;
    k += W.size();
    theta.segment(k, biases_[l].size()) = biases_[l];
    k += biases_[l].size();
  }
  return theta;
}

void ProxyModel::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count()) throw std::invalid_argument("parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd& W = weights_[l];
    W = Eigen::Map<const RowMajor>(theta.data() + k, W.rows(), W.cols());
    k += W.size();
    biases_[l] = theta.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
}

void ProxyModel::check_input(const Eigen::VectorXd& p) const {
  if (widths_.empty()) throw std::logic_error("model is not initialized");
  if (p.size() != input_dim())
    throw std::invalid_argument("model expects " + std::to_string(input_dim()) + " inputs, got " +
                                std::to_string(p.size()));
}

Eigen::VectorXd ProxyModel::forward_raw(const Eigen::VectorXd& p) const {
  check_input(p);
  Eigen::VectorXd a = p;
  const std::size_t L = weights_.size();
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    if (l + 1 < L)
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(activation_, z[i]);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd ProxyModel::forward(const Eigen::VectorXd& p) const {
  Eigen::VectorXd y = forward_raw(p);
  if (projection_) y = project_portfolio(*projection_, y, p[p.size() - 1]);
  return y;
}

Eigen::MatrixXd ProxyModel::input_jacobian(const Eigen::VectorXd& p) const {
  check_input(p);
  Eigen::VectorXd a = p;
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(p.size(), p.size());
  const std::size_t L = weights_.size();
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    J = weights_[l] * J;
    if (l + 1 < L) {
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        J.row(i) *= activate_d1(activation_, z[i]);
        z[i] = activate(activation_, z[i]);
      }
    }
    a = std::move(z);
  }
  return J;
}

// ---------------------------------------------------------------------------

std::string model_to_json(const ProxyModel& model) {
  json layers = json::array();
  for (int l = 0; l < model.layers(); ++l) {
    const Eigen::MatrixXd& W = model.weight(l);
    Eigen::VectorXd flat(W.size());
    Eigen::Map<RowMajor>(flat.data(), W.rows(), W.cols()) = W;
    layers.push_back({{"W", detail::to_json(flat)}, {"b", detail::to_json(model.bias(l))}});
  }
  json j = {{"format", "sobolev-proxy-model"},
            {"version", 1},
            {"widths", model.widths()},
            {"activation", to_string(model.activation())},
            {"layers", layers},
            {"projection", nullptr}};
  if (const auto& head = model.projection()) {
    const Eigen::MatrixXd& L = head->sigma_half;
    Eigen::VectorXd flat(L.size());
    Eigen::Map<RowMajor>(flat.data(), L.rows(), L.cols()) = L;
    j["projection"] = {{"budget", head->budget}, {"sigma_half", detail::to_json(flat)}};
  }
  return j.dump(1) + "\n";
}

ProxyModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "sobolev-proxy-model") throw std::runtime_error("not a proxy model file");
  const auto widths = detail::require(j, "widths").get<std::vector<int>>();
  if (widths.size() < 2) throw std::runtime_error("model needs at least input and output widths");
  const std::vector<int> hidden(widths.begin() + 1, widths.end() - 1);
  ProxyModel model(widths.front(), hidden, widths.back(),
                   activation_from_string(detail::require(j, "activation").get<std::string>()), 0);
  const json& layers = detail::require(j, "layers");
  if (!layers.is_array() || static_cast<int>(layers.size()) != model.layers())
    throw std::runtime_error("layer count does not match widths");
  for (int l = 0; l < model.layers(); ++l) {
    const json& layer = layers[static_cast<std::size_t>(l)];
    const Eigen::VectorXd w = detail::vector_from_json(detail::require(layer, "W"), "W");
    const Eigen::VectorXd b = detail::vector_from_json(detail::require(layer, "b"), "b");
    Eigen::MatrixXd& W = model.weight(l);
    if (w.size() != W.size() || b.size() != model.bias(l).size())
      throw std::runtime_error("layer " + std::to_string(l) + " has the wrong shape");
    W = Eigen::Map<const RowMajor>(w.data(), W.rows(), W.cols());
    model.bias(l) = b;
  }
  const json& proj = detail::require(j, "projection");
  if (!proj.is_null()) {
    const Eigen::VectorXd flat = detail::vector_from_json(detail::require(proj, "sigma_half"), "sigma_half");
    const int n = widths.back();
    if (flat.size() != static_cast<Eigen::Index>(n) * n) throw std::runtime_error("projection has the wrong shape");
    model.set_projection(
        ProjectionHead{Eigen::Map<const RowMajor>(flat.data(), n, n), detail::require(proj, "budget").get<double>()});
  }
  return model;
}

void save_model(const std::filesystem::path& path, const ProxyModel& model) {
  write_file_atomic(path, model_to_json(model));
}

ProxyModel load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

// ---------------------------------------------------------------------------

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::value:
      return "value";
    case LossMode::sobolev:
      return "sobolev";
    case LossMode::selfsup:
      return "selfsup";
    case LossMode::selfsup_sobolev:
      return "selfsup_sobolev";
  }
  return "unknown";
}

LossMode loss_mode_from_string(const std::string& name) {
  for (auto m : {LossMode::value, LossMode::sobolev, LossMode::selfsup, LossMode::selfsup_sobolev})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown loss mode '" + name + "' (value, sobolev, selfsup, selfsup_sobolev)");
}

LossTerms record_loss(const ProxyModel& model, const SolutionRecord& record, const LossSpec& spec,
                      Eigen::VectorXd* grad, double weight) {
  const Eigen::VectorXd& p = record.p;
  const int L = model.layers();
  const Activation act = model.activation();
  if (is_selfsup(spec.mode) && spec.penalty == nullptr)
    throw std::invalid_argument("self-supervised loss needs a penalized problem");
  if (!is_selfsup(spec.mode) && record.x_star.size() != model.output_dim())
    throw std::invalid_argument("record target does not match the model output");
  if (p.size() != model.input_dim()) throw std::invalid_argument("record parameter does not match the model input");

  // Forward pass; zs[l] feeds layer l's activation, as[l] is layer l's input.
  std::vector<Eigen::VectorXd> as(static_cast<std::size_t>(L) + 1), zs(static_cast<std::size_t>(L));
  as[0] = p;
  for (int l = 0; l < L; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    zs[ul] = model.weight(l) * as[ul] + model.bias(l);
    if (l + 1 < L)
      as[ul + 1] = zs[ul].unaryExpr([act](double z) { return activate(act, z); });
    else
      as[ul + 1] = zs[ul];
  }
  const Eigen::VectorXd& y_raw = as[static_cast<std::size_t>(L)];

  LossTerms terms;
  Eigen::VectorXd ybar;
  {
    Eigen::VectorXd y = y_raw;
    Eigen::MatrixXd proj_jac;
    const auto& head = model.projection();
    if (head) {
      y = project_portfolio(*head, y_raw, p[p.size() - 1]);
      if (grad) proj_jac = project_portfolio_jacobian(*head, y_raw, p[p.size() - 1]);
    }
    if (is_selfsup(spec.mode)) {
      terms.value = penalized_objective(*spec.penalty, y, p);
      if (grad) ybar = penalized_gradient(*spec.penalty, y, p);
    } else {
      const Eigen::VectorXd diff = y - record.x_star;
      const double n = static_cast<double>(diff.size());
      terms.value = diff.squaredNorm() / n;
      if (grad) ybar = (2.0 / n) * diff;
    }
    if (grad && head) ybar = proj_jac.transpose() * ybar;
  }

  const bool jac_term = uses_jacobian(spec.mode) && spec.lambda != 0.0 && record.regular() &&
                        !record.jac_entries.empty();
  // Tangent columns: one per distinct input direction in the mask.
  std::map<int, std::size_t> col_slot;
  std::vector<std::vector<Eigen::VectorXd>> zdot, adot;  // [slot][layer]
  std::vector<Eigen::VectorXd> ydot_bar;
  if (jac_term) {
    for (const JacEntry& e : record.jac_entries) col_slot.emplace(e.col, 0);
    std::size_t next = 0;
    for (auto& [col, slot] : col_slot) slot = next++;
    zdot.assign(col_slot.size(), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(L)));
    adot.assign(col_slot.size(), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(L) + 1));
    for (const auto& [col, slot] : col_slot) {
      adot[slot][0] = Eigen::VectorXd::Unit(p.size(), col);
      for (int l = 0; l < L; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        zdot[slot][ul] = model.weight(l) * adot[slot][ul];
        if (l + 1 < L)
          adot[slot][ul + 1] =
              zs[ul].unaryExpr([act](double z) { return activate_d1(act, z); }).cwiseProduct(zdot[slot][ul]);
        else
          adot[slot][ul + 1] = zdot[slot][ul];
      }
    }
    const double inv_m = 1.0 / static_cast<double>(record.jac_entries.size());
    ydot_bar.assign(col_slot.size(), Eigen::VectorXd::Zero(model.output_dim()));
    for (const JacEntry& e : record.jac_entries) {
      const std::size_t slot = col_slot.at(e.col);
      const double res = adot[slot][static_cast<std::size_t>(L)][e.row] - e.value;
      terms.jacobian += res * res;
      ydot_bar[slot][e.row] += 2.0 * inv_m * spec.lambda * res;
    }
    terms.jacobian *= inv_m;
  }
  terms.total = terms.value + spec.lambda * terms.jacobian;
  if (!grad) return terms;

  // Reverse sweep over primal adjoints (ybar) and tangent adjoints (ydot_bar).
  if (grad->size() != model.parameter_count()) grad->setZero(model.parameter_count());
  std::vector<Eigen::Index> offset(static_cast<std::size_t>(L));
  {
    Eigen::Index k = 0;
    for (int l = 0; l < L; ++l) {
      offset[static_cast<std::size_t>(l)] = k;
      k += model.weight(l).size() + model.bias(l).size();
    }
  }
  Eigen::VectorXd zbar = ybar;  // output layer is affine
  std::vector<Eigen::VectorXd> zdot_bar = ydot_bar;
  for (int l = L - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const Eigen::MatrixXd& W = model.weight(l);
    Eigen::Map<RowMajor> gW(grad->data() + offset[ul], W.rows(), W.cols());
    gW.noalias() += weight * zbar * as[ul].transpose();
    for (std::size_t s = 0; s < zdot_bar.size(); ++s) gW.noalias() += weight * zdot_bar[s] * adot[s][ul].transpose();
    grad->segment(offset[ul] + W.size(), W.rows()) += weight * zbar;
    if (l == 0) break;

    Eigen::VectorXd abar = W.transpose() * zbar;
    std::vector<Eigen::VectorXd> adot_bar(zdot_bar.size());
    for (std::size_t s = 0; s < zdot_bar.size(); ++s) adot_bar[s] = W.transpose() * zdot_bar[s];

    const Eigen::VectorXd& zprev = zs[ul - 1];
    const Eigen::VectorXd d1 = zprev.unaryExpr([act](double z) { return activate_d1(act, z); });
    zbar = d1.cwiseProduct(abar);
    if (!adot_bar.empty()) {
      const Eigen::VectorXd d2 = zprev.unaryExpr([act](double z) { return activate_d2(act, z); });
      for (std::size_t s = 0; s < adot_bar.size(); ++s) {
        zbar += d2.cwiseProduct(zdot[s][ul - 1]).cwiseProduct(adot_bar[s]);
        zdot_bar[s] = d1.cwiseProduct(adot_bar[s]);
      }
    }
  }
  return terms;
}

LossGradient loss_and_gradient(const ProxyModel& model, const std::vector<const SolutionRecord*>& batch,
                               const LossSpec& spec, int threads) {
  if (!(spec.lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  LossGradient out;
  out.grad = Eigen::VectorXd::Zero(model.parameter_count());
  if (uses_jacobian(spec.mode) && spec.lambda > 0.0 && !is_smooth(model.activation()))
    out.warnings.push_back(to_string(model.activation()) +
                           " has a zero second derivative almost everywhere; the Jacobian term only trains the "
                           "weights through first-order paths");
  if (batch.empty()) return out;

  const double w = 1.0 / static_cast<double>(batch.size());
  std::vector<LossTerms> terms(batch.size());
  std::vector<Eigen::VectorXd> grads(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    grads[i] = Eigen::VectorXd::Zero(model.parameter_count());
    terms[i] = record_loss(model, *batch[i], spec, &grads[i], w);
  });
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss.value += w * terms[i].value;
    out.loss.jacobian += w * terms[i].jacobian;
    out.grad += grads[i];
  }
  out.loss.total = out.loss.value + spec.lambda * out.loss.jacobian;
  return out;
}

}  // namespace sobolev
