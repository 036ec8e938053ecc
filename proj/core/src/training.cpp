#include "sobolev/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json_util.hpp"
#include "sobolev/random.hpp"

namespace sobolev {

using detail::json;

double value_loss(const ProxyModel& model, const SolutionRecord& record) {
  return record_loss(model, record, {LossMode::value, 0.0}).total;
}

double sobolev_loss(const ProxyModel& model, const SolutionRecord& record, double lambda) {
  return record_loss(model, record, {LossMode::sobolev, lambda}).total;
}

double selfsup_loss(const ProxyModel& model, const PenalizedProblem& pen, const Eigen::VectorXd& p) {
  SolutionRecord rec;
  rec.p = p;
  return record_loss(model, rec, {LossMode::selfsup, 0.0, &pen}).total;
}

double selfsup_sobolev_loss(const ProxyModel& model, const SolutionRecord& record, const PenalizedProblem& pen,
                            double lambda) {
  return record_loss(model, record, {LossMode::selfsup_sobolev, lambda, &pen}).total;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(adam.lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("Adam decays must be in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
  if (!(penalty_beta >= 0.0 && penalty_gamma >= 0.0)) throw std::invalid_argument("penalty weights must be >= 0");
  if (val_every < 1) throw std::invalid_argument("validation cadence must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden widths must be >= 1");
}

ProxyModel initial_model(const ParametricProblem& problem, const TrainConfig& config) {
  ProxyModel model(problem.d(), config.hidden, problem.n(), config.activation, derive_seed(config.seed, 0));
  if (config.projection) {
    const auto* mk = dynamic_cast<const Markowitz*>(&problem);
    if (!mk) throw std::invalid_argument("the projection head is only available for markowitz problems");
    model.set_projection(ProjectionHead::from(mk->instance()));
  }
  return model;
}

double dataset_mse(const ProxyModel& model, const std::vector<SolutionRecord>& records) {
  if (records.empty()) return 0.0;
  double sum = 0.0;
  for (const SolutionRecord& r : records) sum += value_loss(model, r);
  return sum / static_cast<double>(records.size());
}

namespace {

void check_dataset(const ParametricProblem& problem, const Dataset& ds, const char* what) {
  if (ds.n != problem.n() || ds.d != problem.d())
    throw std::invalid_argument(std::string(what) + " dataset dimensions do not match problem " + problem.name());
}

}  // namespace

TrainResult train(ProxyModel model, const ParametricProblem& problem, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& config) {
  config.validate();
  check_dataset(problem, train_set, "training");
  if (val_set) check_dataset(problem, *val_set, "validation");
  if (model.input_dim() != problem.d() || model.output_dim() != problem.n())
    throw std::invalid_argument("model dimensions do not match problem " + problem.name());
  if (train_set.records.empty() && config.epochs > 0) throw std::invalid_argument("training dataset is empty");

  const auto start = std::chrono::steady_clock::now();
  const PenalizedProblem pen(problem, config.penalty_beta, config.penalty_gamma);
  const LossSpec spec{config.mode, config.lambda, &pen};

  TrainResult out;
  if (val_set) out.report.val.push_back({0, dataset_mse(model, val_set->records)});

  const auto N = train_set.records.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, 1));

  const Eigen::Index P = model.parameter_count();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(P), v = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd theta = model.parameters();
  long step = 0;
  double b1t = 1.0, b2t = 1.0;
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    EpochLoss el;
    el.epoch = epoch;
    std::vector<const SolutionRecord*> batch;
    for (std::size_t begin = 0; begin < N; begin += bs) {
      const std::size_t end = std::min(N, begin + bs);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set.records[order[i]]);
      LossGradient lg = loss_and_gradient(model, batch, spec, config.threads);
      if (step == 0)
        for (auto& w : lg.warnings) out.report.warnings.push_back(std::move(w));
      if (!std::isfinite(lg.loss.total) || !lg.grad.allFinite()) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << begin / bs + 1 << ": loss "
            << lg.loss.total << " (value " << lg.loss.value << ", jacobian " << lg.loss.jacobian
            << "); try a smaller learning rate or lambda";
        throw TrainingDiverged(msg.str());
      }
      const double share = static_cast<double>(end - begin) / static_cast<double>(N);
      el.value += share * lg.loss.value;
      el.jacobian += share * lg.loss.jacobian;

      ++step;
      b1t *= config.adam.beta1;
      b2t *= config.adam.beta2;
      m = config.adam.beta1 * m + (1.0 - config.adam.beta1) * lg.grad;
      v = config.adam.beta2 * v + (1.0 - config.adam.beta2) * lg.grad.cwiseAbs2();
      const double c1 = 1.0 / (1.0 - b1t), c2 = 1.0 / (1.0 - b2t);
      theta.array() -= config.adam.lr * (m.array() * c1) / ((v.array() * c2).sqrt() + config.adam.eps);
      model.set_parameters(theta);
    }
    el.total = el.value + config.lambda * el.jacobian;
    out.report.train.push_back(el);
    if (val_set && (epoch % config.val_every == 0 || epoch == config.epochs))
      out.report.val.push_back({epoch, dataset_mse(model, val_set->records)});
  }
  out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.model = std::move(model);
  return out;
}

TrainResult train(const ParametricProblem& problem, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& config) {
  config.validate();
  return train(initial_model(problem, config), problem, train_set, val_set, config);
}

// ---------------------------------------------------------------------------

std::string train_config_to_json(const TrainConfig& c) {
  const json j = {{"mode", to_string(c.mode)},
                  {"lambda", c.lambda},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"lr", c.adam.lr},
                  {"beta1", c.adam.beta1},
                  {"beta2", c.adam.beta2},
                  {"eps", c.adam.eps},
                  {"seed", c.seed},
                  {"penalty_beta", c.penalty_beta},
                  {"penalty_gamma", c.penalty_gamma},
                  {"val_every", c.val_every},
                  {"hidden", c.hidden},
                  {"activation", to_string(c.activation)},
                  {"projection", c.projection}};
  return j.dump(1);
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("training config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  static const char* known[] = {"mode",  "lambda", "epochs",       "batch_size",    "lr",
                                "beta1", "beta2",  "eps",          "seed",          "penalty_beta",
                                "penalty_gamma",   "val_every",    "hidden",        "activation",
                                "projection",      "threads"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown training config field '" + key + "'");
  }
  try {
    if (j.contains("mode")) c.mode = loss_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("lr")) c.adam.lr = j["lr"].get<double>();
    if (j.contains("beta1")) c.adam.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) c.adam.beta2 = j["beta2"].get<double>();
    if (j.contains("eps")) c.adam.eps = j["eps"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("penalty_beta")) c.penalty_beta = j["penalty_beta"].get<double>();
    if (j.contains("penalty_gamma")) c.penalty_gamma = j["penalty_gamma"].get<double>();
    if (j.contains("val_every")) c.val_every = j["val_every"].get<int>();
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("activation")) c.activation = activation_from_string(j["activation"].get<std::string>());
    if (j.contains("projection")) c.projection = j["projection"].get<bool>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("training config has a field of the wrong type: ") + e.what());
  }
  return c;
}

std::string report_to_json(const TrainReport& r) {
  json train = json::array(), val = json::array();
  for (const EpochLoss& e : r.train)
    train.push_back({{"epoch", e.epoch}, {"value", e.value}, {"jacobian", e.jacobian}, {"total", e.total}});
  for (const ValPoint& v : r.val) val.push_back({{"epoch", v.epoch}, {"mse", v.mse}});
  const json j = {{"train", train}, {"val_mse", val}, {"warnings", r.warnings}};
  return j.dump(1) + "\n";
}

std::string report_to_csv(const TrainReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,value,jacobian,total,val_mse\n";
  std::size_t vi = 0;
  while (vi < r.val.size() && r.val[vi].epoch == 0) ++vi;
  for (const EpochLoss& e : r.train) {
    out << e.epoch << ',' << e.value << ',' << e.jacobian << ',' << e.total << ',';
    if (vi < r.val.size() && r.val[vi].epoch == e.epoch) out << r.val[vi++].mse;
    out << '\n';
  }
  return out.str();
}

}  // namespace sobolev
