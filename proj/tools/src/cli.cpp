#include "sobolev/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "sobolev/datagen.hpp"
#include "sobolev/eval.hpp"
#include "sobolev/parallel.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/proxy.hpp"
#include "sobolev/sensitivity.hpp"
#include "sobolev/solver.hpp"
#include "sobolev/training.hpp"

#ifndef SOBOLEV_VERSION
#define SOBOLEV_VERSION "0.0.0"
#endif

namespace sobolev::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Option table. Every option is a config key; flags override the JSON file
// given by --config, which overrides the defaults listed here.

enum class Kind { text, integer, number, flag, integers, numbers };

struct Field {
  std::string key;
  Kind kind;
  json def;  // null: no default
  std::string help;
  bool required = false;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::vector<Field> fields;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
};

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

const char* type_name(Kind kind) {
  switch (kind) {
    case Kind::integer:
      return "INT";
    case Kind::number:
      return "FLOAT";
    case Kind::integers:
      return "INT,...";
    case Kind::numbers:
      return "FLOAT,...";
    default:
      return "TEXT";
  }
}

void add_fields(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_path, "JSON file with option values, or a run manifest (flags take precedence)");
  for (const Field& f : cmd.fields) {
    std::string help = f.help;
    if (!f.def.is_null()) help += " [default: " + f.def.dump() + "]";
    if (f.kind == Kind::flag) {
      cmd.options[f.key] = cmd.app->add_flag(flag_name(f.key), cmd.flags[f.key], help);
    } else {
      cmd.options[f.key] = cmd.app->add_option(flag_name(f.key), cmd.text[f.key], help)->type_name(type_name(f.kind));
    }
  }
}

long long parse_integer(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument(flag_name(key) + ": expected an integer, got '" + s + "'");
  return v;
}

double parse_number(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw std::invalid_argument(flag_name(key) + ": expected a finite number, got '" + s + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

json parse_text(const Field& f, const std::string& s) {
  switch (f.kind) {
    case Kind::text:
      return s;
    case Kind::integer:
      return parse_integer(f.key, s);
    case Kind::number:
      return parse_number(f.key, s);
    case Kind::flag:
      return true;
    case Kind::integers: {
      json a = json::array();
      for (const auto& item : split_list(s)) a.push_back(parse_integer(f.key, item));
      return a;
    }
    case Kind::numbers: {
      json a = json::array();
      for (const auto& item : split_list(s)) a.push_back(parse_number(f.key, item));
      return a;
    }
  }
  return nullptr;
}

// Type check of a value read from a config file.
json coerce(const Field& f, const json& v) {
  auto bad = [&] { return std::invalid_argument("config field '" + f.key + "' has the wrong type"); };
  if (v.is_null() && f.def.is_null() && !f.required) return v;
  switch (f.kind) {
    case Kind::text:
      if (!v.is_string()) throw bad();
      return v;
    case Kind::integer:
      if (!v.is_number_integer()) throw bad();
      return v;
    case Kind::number:
      if (!v.is_number()) throw bad();
      return v.get<double>();
    case Kind::flag:
      if (!v.is_boolean()) throw bad();
      return v;
    case Kind::integers:
    case Kind::numbers: {
      if (v.is_number()) return coerce(f, json::array({v}));
      if (!v.is_array()) throw bad();
      json a = json::array();
      for (const json& x : v) {
        if (f.kind == Kind::integers ? !x.is_number_integer() : !x.is_number()) throw bad();
        a.push_back(f.kind == Kind::integers ? json(x) : json(x.get<double>()));
      }
      return a;
    }
  }
  return v;
}

json resolve(const Command& cmd) {
  json cfg = json::object();
  for (const Field& f : cmd.fields) cfg[f.key] = f.def;
  if (!cmd.config_path.empty()) {
    json file;
    try {
      file = json::parse(read_file(cmd.config_path));
    } catch (const json::exception& e) {
      throw std::invalid_argument("config file " + cmd.config_path + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    // A run manifest replays its resolved config.
    if (file.contains("subcommand") && file.contains("config")) {
      if (file["subcommand"] != cmd.name)
        throw std::invalid_argument("manifest " + cmd.config_path + " belongs to " + file["subcommand"].dump());
      file = json(file["config"]);
    }
    for (const auto& [key, value] : file.items()) {
      const auto it = std::find_if(cmd.fields.begin(), cmd.fields.end(), [&](const Field& f) { return f.key == key; });
      if (it == cmd.fields.end()) throw std::invalid_argument("unknown config field '" + key + "' for " + cmd.name);
      cfg[key] = coerce(*it, value);
    }
  }
  for (const Field& f : cmd.fields) {
    const CLI::Option* opt = cmd.options.at(f.key);
    if (opt->count() == 0) continue;
    cfg[f.key] = f.kind == Kind::flag ? json(cmd.flags.at(f.key)) : parse_text(f, cmd.text.at(f.key));
  }
  for (const Field& f : cmd.fields)
    if (f.required && cfg[f.key].is_null()) throw std::invalid_argument(flag_name(f.key) + " is required");
  return cfg;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_output(const fs::path& path, const std::string& content) {
  ensure_parent(path);
  write_file_atomic(path, content);
}

/// "dir/model.json" -> "dir/model<suffix>"
fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path p = path;
  p.replace_filename(path.stem().string() + suffix);
  return p;
}

struct RunRecord {
  json inputs = json::array();
  json outputs = json::array();
  json extra = json::object();
  fs::path manifest;
};

void write_manifest(const std::string& subcommand, const json& cfg, const RunRecord& rec, const std::string& started,
                    double seconds) {
  if (rec.manifest.empty()) return;
  json m = {{"subcommand", subcommand},
            {"config", cfg},
            {"inputs", rec.inputs},
            {"outputs", rec.outputs},
            {"seed", cfg.contains("seed") ? cfg["seed"] : json(nullptr)},
            {"version", SOBOLEV_VERSION},
            {"started", started},
            {"finished", utc_now()},
            {"wall_seconds", seconds}};
  for (const auto& [k, v] : rec.extra.items()) m[k] = v;
  write_output(rec.manifest, m.dump(1) + "\n");
}

std::vector<int> ints_of(const json& a) { return a.get<std::vector<int>>(); }
std::vector<double> numbers_of(const json& a) { return a.get<std::vector<double>>(); }

int threads_of(const json& cfg) { return resolve_threads(cfg["threads"].get<int>()); }

std::uint64_t seed_of(const json& cfg) {
  const long long s = cfg["seed"].get<long long>();
  if (s < 0) throw std::invalid_argument("--seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

Dataset load_dataset(const std::string& path) {
  try {
    return read_dataset(path);
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

ProxyModel load_proxy(const std::string& path) {
  try {
    return load_model(path);
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

// Lambda defaults follow the per-case training table: 4.35 for the portfolio
// proxies, 0.30 otherwise.
double default_lambda(const ParametricProblem& problem) {
  return problem.name().rfind("markowitz", 0) == 0 ? 4.35 : 0.30;
}

std::vector<Field> train_fields(const char* default_mode) {
  return {
      {"mode", Kind::text, default_mode, "loss: value, sobolev, selfsup, selfsup_sobolev"},
      {"lambda", Kind::number, nullptr, "Jacobian-term weight (default 4.35 for markowitz, 0.30 otherwise)"},
      {"epochs", Kind::integer, 100, "training epochs"},
      {"batch", Kind::integer, 32, "minibatch size"},
      {"widths", Kind::integers, json::array({64, 64}), "hidden layer widths, comma separated"},
      {"activation", Kind::text, "tanh", "tanh, softplus, sigmoid, relu, leaky_relu"},
      {"seed", Kind::integer, 0, "seed for initialization and batch order"},
      {"lr", Kind::number, 1e-3, "Adam step size"},
      {"beta1", Kind::number, 0.9, "Adam first-moment decay"},
      {"beta2", Kind::number, 0.999, "Adam second-moment decay"},
      {"eps", Kind::number, 1e-8, "Adam epsilon"},
      {"penalty_beta", Kind::number, 100.0, "squared-violation weight of the self-supervised penalty"},
      {"penalty_gamma", Kind::number, 100.0, "lower-bound weight of the self-supervised penalty"},
      {"val_every", Kind::integer, 1, "validation cadence in epochs"},
      {"projection", Kind::flag, false, "add the portfolio feasibility head (markowitz only)"},
      {"threads", Kind::integer, 0, "worker threads (0: SOBOLEV_PROXY_THREADS or all cores)"},
  };
}

TrainConfig train_config_of(const json& cfg, const ParametricProblem& problem) {
  TrainConfig c;
  c.mode = loss_mode_from_string(cfg["mode"].get<std::string>());
  c.lambda = cfg["lambda"].is_null() ? (uses_jacobian(c.mode) ? default_lambda(problem) : 0.0)
                                     : cfg["lambda"].get<double>();
  c.epochs = cfg["epochs"].get<int>();
  c.batch_size = cfg["batch"].get<int>();
  c.hidden = ints_of(cfg["widths"]);
  c.activation = activation_from_string(cfg["activation"].get<std::string>());
  c.seed = seed_of(cfg);
  c.adam = {cfg["lr"].get<double>(), cfg["beta1"].get<double>(), cfg["beta2"].get<double>(), cfg["eps"].get<double>()};
  c.penalty_beta = cfg["penalty_beta"].get<double>();
  c.penalty_gamma = cfg["penalty_gamma"].get<double>();
  c.val_every = cfg["val_every"].get<int>();
  c.projection = cfg["projection"].get<bool>();
  c.threads = threads_of(cfg);
  c.validate();
  return c;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// ---------------------------------------------------------------------------
// Subcommands

RunRecord cmd_generate(json& cfg, std::ostream& out) {
  auto problem = make_problem(cfg["problem"].get<std::string>());
  GenerationConfig g;
  g.seed = seed_of(cfg);
  g.proportions = problem->default_proportions();
  if (!cfg["box"].is_null()) g.proportions.box = cfg["box"].get<double>();
  if (!cfg["line"].is_null()) g.proportions.line = cfg["line"].get<double>();
  if (!cfg["distribution"].is_null()) g.proportions.distribution = cfg["distribution"].get<double>();
  cfg["box"] = g.proportions.box;
  cfg["line"] = g.proportions.line;
  cfg["distribution"] = g.proportions.distribution;
  g.sparsity = cfg["sparsity"].get<double>();
  if (!(g.sparsity >= 0.0 && g.sparsity < 1.0)) throw std::invalid_argument("--sparsity must be in [0, 1)");
  g.counts = {cfg["train"].get<int>(), cfg["val"].get<int>(), cfg["test"].get<int>()};
  if (g.counts.train < 0 || g.counts.val < 0 || g.counts.test < 0)
    throw std::invalid_argument("split sizes must be >= 0");
  g.solver_tol = cfg["solver_tol"].get<double>();
  if (!(g.solver_tol > 0.0)) throw std::invalid_argument("--solver-tol must be > 0");
  strategy_counts(1, g.proportions);  // validates the proportions

  const fs::path dir = cfg["out"].get<std::string>();
  const int threads = threads_of(cfg);
  RunRecord rec;
  rec.manifest = dir / "manifest.json";
  json stats = json::object();
  for (const char* split : {"train", "val", "test"}) {
    const int count = cfg[split].get<int>();
    const Dataset ds = build_split(*problem, split, count, g, threads);
    if (count > 0 && ds.records.empty())
      throw NumericalFailure(std::string("no ") + split + " sample could be solved");
    const fs::path path = dir / (std::string(split) + ".jsonl");
    write_output(path, dataset_to_jsonl(ds));
    rec.outputs.push_back(path.string());
    stats[split] = {{"requested", ds.stats.requested},
                    {"records", ds.records.size()},
                    {"solver_failures", ds.stats.solver_failures},
                    {"degenerate", ds.stats.degenerate}};
    out << split << ": " << ds.records.size() << " records (" << ds.stats.solver_failures << " solver failures, "
        << ds.stats.degenerate << " degenerate) -> " << path.string() << "\n";
  }
  rec.extra["stats"] = stats;
  return rec;
}

RunRecord cmd_solve(json& cfg, std::ostream& out) {
  auto problem = make_problem(cfg["problem"].get<std::string>());
  Eigen::VectorXd p = problem->reference_parameter();
  if (!cfg["p"].is_null()) {
    const auto v = numbers_of(cfg["p"]);
    if (static_cast<int>(v.size()) != problem->d())
      throw std::invalid_argument("--p needs " + std::to_string(problem->d()) + " values for " + problem->name());
    p = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  SolverOptions opt;
  opt.tol = cfg["tol"].get<double>();
  if (!(opt.tol > 0.0)) throw std::invalid_argument("--tol must be > 0");
  const SolverResult r = solve(*problem, p, opt);
  json j = {{"problem", problem->name()},
            {"p", vector_json(p)},
            {"status", to_string(r.status)},
            {"iterations", r.iterations},
            {"kkt_residual", r.kkt_residual},
            {"objective", r.objective},
            {"x", vector_json(r.x_star)},
            {"lambda_eq", vector_json(r.lambda_eq)},
            {"lambda_ineq", vector_json(r.lambda_ineq)}};
  if (r.status == SolverStatus::converged) {
    const SensitivityResult s = kkt_sensitivity(*problem, p, r);
    j["sensitivity"] = {{"status", to_string(s.status)}, {"active_set", s.active_set}};
    if (s.status == SensitivityStatus::regular) j["sensitivity"]["dx_dp"] = matrix_json(s.dx_dp);
  }
  RunRecord rec;
  const std::string text = j.dump(1) + "\n";
  const std::string path = cfg["out"].get<std::string>();
  if (path.empty()) {
    out << text;
  } else {
    write_output(path, text);
    rec.outputs.push_back(path);
    rec.manifest = sibling(path, ".manifest.json");
    out << "solution -> " << path << "\n";
  }
  if (r.status != SolverStatus::converged) {
    std::ostringstream msg;
    msg << "solver stopped with status " << to_string(r.status) << " (KKT residual " << r.kkt_residual << ")";
    throw NumericalFailure(msg.str());
  }
  return rec;
}

RunRecord cmd_train(json& cfg, std::ostream& out) {
  const std::string data_path = cfg["data"].get<std::string>();
  const Dataset train_set = load_dataset(data_path);
  auto problem = make_problem(train_set.problem_name);
  std::optional<Dataset> val_set;
  RunRecord rec;
  rec.inputs.push_back(data_path);
  if (!cfg["val"].get<std::string>().empty()) {
    val_set = load_dataset(cfg["val"].get<std::string>());
    rec.inputs.push_back(cfg["val"]);
  }
  const TrainConfig tc = train_config_of(cfg, *problem);
  cfg["lambda"] = tc.lambda;
  const TrainResult res = train(*problem, train_set, val_set ? &*val_set : nullptr, tc);

  const fs::path model_path = cfg["out"].get<std::string>();
  const fs::path report_json = sibling(model_path, ".report.json"), report_csv = sibling(model_path, ".report.csv");
  write_output(model_path, model_to_json(res.model));
  write_output(report_json, report_to_json(res.report));
  write_output(report_csv, report_to_csv(res.report));
  rec.outputs = {model_path.string(), report_json.string(), report_csv.string()};
  rec.manifest = sibling(model_path, ".manifest.json");
  rec.extra["train_wall_seconds"] = res.report.wall_seconds;
  for (const std::string& w : res.report.warnings) out << "warning: " << w << "\n";
  if (!res.report.train.empty()) {
    const EpochLoss& last = res.report.train.back();
    out << "epoch " << last.epoch << ": value " << last.value << ", jacobian " << last.jacobian << ", total "
        << last.total << "\n";
  }
  if (!res.report.val.empty()) out << "validation mse " << res.report.val.back().mse << "\n";
  out << "model -> " << model_path.string() << "\n";
  return rec;
}

RunRecord cmd_eval(json& cfg, std::ostream& out) {
  const ProxyModel model = load_proxy(cfg["model"].get<std::string>());
  const Dataset ds = load_dataset(cfg["data"].get<std::string>());
  auto problem = make_problem(ds.problem_name);
  const EvalReport rep = evaluate(*problem, model, ds, threads_of(cfg));
  const fs::path path = cfg["out"].get<std::string>();
  const fs::path csv = sibling(path, ".csv");
  write_output(path, eval_report_to_json(rep));
  write_output(csv, eval_report_to_csv(rep));
  RunRecord rec;
  rec.inputs = {cfg["model"], cfg["data"]};
  rec.outputs = {path.string(), csv.string()};
  rec.manifest = sibling(path, ".manifest.json");
  out << "instances " << rep.instances.size() << "\n"
      << "mse  mean " << rep.mse.mean << " median " << rep.mse.median << " std " << rep.mse.stddev << "\n"
      << "gap  mean " << rep.gap.mean << " median " << rep.gap.median << " std " << rep.gap.stddev;
  if (rep.gap_undefined > 0) out << " (" << rep.gap_undefined << " undefined: optimal objective is 0)";
  out << "\ninf  mean " << rep.inf.mean << " median " << rep.inf.median << " std " << rep.inf.stddev << "\n";
  return rec;
}

RunRecord cmd_compare(json& cfg, std::ostream& out) {
  const ProxyModel a = load_proxy(cfg["benchmark"].get<std::string>());
  const ProxyModel b = load_proxy(cfg["sobolev"].get<std::string>());
  const Dataset ds = load_dataset(cfg["data"].get<std::string>());
  auto problem = make_problem(ds.problem_name);
  const int threads = threads_of(cfg);
  const Eigen::MatrixXd va = violation_matrix(*problem, a, ds, threads);
  const Eigen::MatrixXd vb = violation_matrix(*problem, b, ds, threads);
  const auto r = rmi(va, vb);

  std::ostringstream csv;
  csv.precision(17);
  csv << "instance,max_inf_benchmark,max_inf_sobolev,rmi\n";
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    csv << i << ',' << (va.cols() ? va.row(i).maxCoeff() : 0.0) << ',' << (vb.cols() ? vb.row(i).maxCoeff() : 0.0)
        << ',';
    if (r) csv << (*r)[i];
    csv << '\n';
  }
  json summary = {{"instances", va.rows()}, {"rmi", nullptr}};
  if (r && r->size() > 0) {
    const Summary s = summarize(std::vector<double>(r->data(), r->data() + r->size()));
    summary["rmi"] = {{"mean", s.mean}, {"median", s.median}, {"std", s.stddev}};
    out << "rmi median " << s.median << "%, mean " << s.mean << "%\n";
  } else {
    out << "rmi undefined: the sobolev model has no constraint violation on any instance\n";
  }
  const fs::path path = cfg["out"].get<std::string>();
  const fs::path summary_path = sibling(path, ".json");
  write_output(path, csv.str());
  write_output(summary_path, summary.dump(1) + "\n");
  RunRecord rec;
  rec.inputs = {cfg["benchmark"], cfg["sobolev"], cfg["data"]};
  rec.outputs = {path.string(), summary_path.string()};
  rec.manifest = sibling(path, ".manifest.json");
  return rec;
}

RunRecord cmd_verify_bounds(json& cfg, std::ostream& out) {
  BoundOptions opt;
  opt.points = ints_of(cfg["points"]);
  opt.grid = cfg["grid"].get<int>();
  opt.pairs = cfg["pairs"].get<int>();
  const BoundVerification v = verify_bounds(ScalarReference{}, opt);

  out << std::left << std::setw(9) << "theorem" << std::setw(9) << "interp" << std::setw(7) << "N" << std::setw(14)
      << "delta" << std::setw(14) << "sup_error" << std::setw(14) << "bound"
      << "pass\n";
  for (const BoundRecord& b : v.bounds)
    out << std::setw(9) << b.theorem << std::setw(9) << b.interpolant << std::setw(7) << b.points << std::setw(14)
        << b.delta << std::setw(14) << b.sup_error << std::setw(14) << b.bound << (b.pass ? "yes" : "NO") << "\n";
  for (const RateRecord& r : v.rates)
    out << "rate " << r.interpolant << " " << r.from_points << "->" << r.to_points << ": " << r.ratio << " (band ["
        << r.lo << ", " << r.hi << "]) " << (r.pass ? "yes" : "NO") << "\n";

  const fs::path path = cfg["out"].get<std::string>();
  const fs::path csv = sibling(path, ".csv");
  write_output(path, bounds_to_json(v));
  write_output(csv, bounds_to_csv(v));
  RunRecord rec;
  rec.outputs = {path.string(), csv.string()};
  rec.manifest = sibling(path, ".manifest.json");
  return rec;
}

RunRecord cmd_ablate(json& cfg, std::ostream& out) {
  const Dataset train_set = load_dataset(cfg["data"].get<std::string>());
  const Dataset test_set = load_dataset(cfg["test"].get<std::string>());
  auto problem = make_problem(train_set.problem_name);
  const TrainConfig tc = train_config_of(cfg, *problem);
  cfg["lambda"] = tc.lambda;
  std::vector<double> sparsities;
  for (double kept : numbers_of(cfg["kept"])) {
    if (!(kept > 0.0 && kept <= 1.0)) throw std::invalid_argument("--kept fractions must be in (0, 1]");
    sparsities.push_back(1.0 - kept);
  }
  const auto rows = ablate_mask(*problem, train_set, test_set, sparsities, tc);
  for (const AblationRow& r : rows)
    out << "kept " << r.kept_fraction << " (" << r.kept_entries << " entries): test mse " << r.test_mse << "\n";
  const fs::path path = cfg["out"].get<std::string>();
  write_output(path, ablation_to_csv(rows));
  RunRecord rec;
  rec.inputs = {cfg["data"], cfg["test"]};
  rec.outputs = {path.string()};
  rec.manifest = sibling(path, ".manifest.json");
  return rec;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sobolev-trained optimization proxies: data generation, training and evaluation", "sobolev-proxy"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SOBOLEV_VERSION);

  using Handler = RunRecord (*)(json&, std::ostream&);
  std::vector<std::unique_ptr<Command>> commands;
  std::map<const CLI::App*, Handler> handlers;
  auto add = [&](const std::string& name, const std::string& about, std::vector<Field> fields, Handler h) {
    auto cmd = std::make_unique<Command>();
    cmd->name = name;
    cmd->app = app.add_subcommand(name, about);
    cmd->fields = std::move(fields);
    add_fields(*cmd);
    handlers[cmd->app] = h;
    commands.push_back(std::move(cmd));
  };

  add("generate", "sample parameters, solve, differentiate and write train/val/test JSONL",
      {{"problem", Kind::text, nullptr, "toy-qp, toy-qp-N, markowitz-N or acopf3", true},
       {"train", Kind::integer, 512, "training samples"},
       {"val", Kind::integer, 128, "validation samples"},
       {"test", Kind::integer, 128, "test samples"},
       {"sparsity", Kind::number, 0.0, "fraction of Jacobian entries left out of each mask"},
       {"seed", Kind::integer, 0, "sampling and mask seed"},
       {"box", Kind::number, nullptr, "share of box samples (default: per problem)"},
       {"line", Kind::number, nullptr, "share of line-excursion samples (default: per problem)"},
       {"distribution", Kind::number, nullptr, "share of reference-scaled samples (default: per problem)"},
       {"solver_tol", Kind::number, 1e-10, "interior-point KKT tolerance"},
       {"out", Kind::text, "data", "output directory"},
       {"threads", Kind::integer, 0, "worker threads (0: SOBOLEV_PROXY_THREADS or all cores)"}},
      cmd_generate);
  add("solve", "solve one instance and print the solution with its sensitivities",
      {{"problem", Kind::text, nullptr, "problem name", true},
       {"p", Kind::numbers, nullptr, "parameter vector, comma separated (default: box midpoint)"},
       {"tol", Kind::number, 1e-10, "KKT tolerance"},
       {"out", Kind::text, "", "output JSON file (default: standard output)"}},
      cmd_solve);
  {
    auto fields = train_fields("value");
    fields.insert(fields.begin(), {{"data", Kind::text, nullptr, "training dataset (JSONL)", true},
                                   {"val", Kind::text, "", "validation dataset (JSONL)"},
                                   {"out", Kind::text, "model.json", "model file; the report is written next to it"}});
    add("train", "train a proxy network", fields, cmd_train);
  }
  add("eval", "MSE, GAP and INF of a model on a dataset",
      {{"model", Kind::text, nullptr, "model file", true},
       {"data", Kind::text, nullptr, "dataset (JSONL)", true},
       {"out", Kind::text, "eval.json", "report file; a CSV is written next to it"},
       {"threads", Kind::integer, 0, "worker threads"}},
      cmd_eval);
  add("compare", "per-instance RMI of a Sobolev model against a benchmark model",
      {{"benchmark", Kind::text, nullptr, "benchmark (value-trained) model", true},
       {"sobolev", Kind::text, nullptr, "Sobolev-trained model", true},
       {"data", Kind::text, nullptr, "dataset (JSONL)", true},
       {"out", Kind::text, "compare.csv", "RMI table; a JSON summary is written next to it"},
       {"threads", Kind::integer, 0, "worker threads"}},
      cmd_compare);
  add("verify-bounds", "check the value, Jacobian and Sobolev error bounds on sin over [0, 2 pi]",
      {{"points", Kind::integers, json::array({5, 9, 17, 33}), "training-set sizes, comma separated"},
       {"grid", Kind::integer, 4096, "evaluation grid size"},
       {"pairs", Kind::integer, 100000, "pairs for the Lipschitz estimates"},
       {"out", Kind::text, "bounds.json", "bound table; a CSV is written next to it"}},
      cmd_verify_bounds);
  {
    auto fields = train_fields("sobolev");
    fields.insert(fields.begin(), {{"data", Kind::text, nullptr, "training dataset generated with sparsity 0", true},
                                   {"test", Kind::text, nullptr, "test dataset", true},
                                   {"kept", Kind::numbers, json::array({0.05, 0.10, 0.25, 1.0}),
                                    "kept Jacobian fractions, comma separated"},
                                   {"out", Kind::text, "ablation.csv", "ablation table"}});
    add("ablate-mask", "retrain at several mask densities and report test MSE", fields, cmd_ablate);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidationError;
  }

  for (const auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    json cfg;
    try {
      cfg = resolve(*cmd);
      const RunRecord rec = handlers.at(cmd->app)(cfg, out);
      write_manifest(cmd->name, cfg, rec,
                     started, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      return kOk;
    } catch (const NumericalFailure& e) {
      err << "numerical failure: " << e.what() << "\n";
      return kNumericalFailure;
    } catch (const TrainingDiverged& e) {
      err << "numerical failure: " << e.what() << "\n";
      return kNumericalFailure;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kValidationError;
    }
  }
  err << app.help();
  return kValidationError;
}

}  // namespace sobolev::cli
