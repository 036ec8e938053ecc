#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "sobolev/datagen.hpp"

namespace sobolev {

using detail::json;

namespace {

json config_to_json(const GenerationConfig& c) {
  return {{"seed", c.seed},
          {"proportions",
           {{"box", c.proportions.box}, {"line", c.proportions.line}, {"distribution", c.proportions.distribution}}},
          {"sparsity", c.sparsity},
          {"counts", {{"train", c.counts.train}, {"val", c.counts.val}, {"test", c.counts.test}}},
          {"solver_tol", c.solver_tol}};
}

GenerationConfig config_from_json(const json& j) {
  GenerationConfig c;
  c.seed = detail::require(j, "seed").get<std::uint64_t>();
  const json& pr = detail::require(j, "proportions");
  c.proportions = {detail::require(pr, "box").get<double>(), detail::require(pr, "line").get<double>(),
                   detail::require(pr, "distribution").get<double>()};
  c.sparsity = detail::require(j, "sparsity").get<double>();
  const json& counts = detail::require(j, "counts");
  c.counts = {detail::require(counts, "train").get<int>(), detail::require(counts, "val").get<int>(),
              detail::require(counts, "test").get<int>()};
  c.solver_tol = detail::require(j, "solver_tol").get<double>();
  return c;
}

json record_to_json(const SolutionRecord& r) {
  json mask = json::array();
  for (const auto& [row, col] : r.mask.kept_entries) mask.push_back({row, col});
  json jac = json::array();
  for (const JacEntry& e : r.jac_entries) {
    if (!std::isfinite(e.value)) throw std::runtime_error("refusing to serialize a non-finite Jacobian entry");
    jac.push_back({e.row, e.col, e.value});
  }
  if (!std::isfinite(r.objective)) throw std::runtime_error("refusing to serialize a non-finite objective");
  return {{"p", detail::to_json(r.p)},
          {"x", detail::to_json(r.x_star)},
          {"lambda", detail::to_json(r.lambda)},
          {"obj", r.objective},
          {"mask", mask},
          {"sparsity", r.mask.sparsity},
          {"jac", jac},
          {"reg", r.regularity}};
}

SolutionRecord record_from_json(const json& j, int n, int d) {
  SolutionRecord r;
  r.p = detail::vector_from_json(detail::require(j, "p"), "p");
  r.x_star = detail::vector_from_json(detail::require(j, "x"), "x");
  r.lambda = detail::vector_from_json(detail::require(j, "lambda"), "lambda");
  r.objective = detail::require(j, "obj").get<double>();
  if (r.p.size() != d || r.x_star.size() != n) throw std::runtime_error("record dimensions do not match the header");
  for (const json& e : detail::require(j, "mask")) {
    if (!e.is_array() || e.size() != 2) throw std::runtime_error("mask entries must be [row, col]");
    const int row = e[0].get<int>(), col = e[1].get<int>();
    if (row < 0 || row >= n || col < 0 || col >= d) throw std::runtime_error("mask entry out of range");
    r.mask.kept_entries.emplace_back(row, col);
  }
  if (j.contains("sparsity")) r.mask.sparsity = j.at("sparsity").get<double>();
  for (const json& e : detail::require(j, "jac")) {
    if (!e.is_array() || e.size() != 3) throw std::runtime_error("jac entries must be [row, col, value]");
    r.jac_entries.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
  }
  r.regularity = detail::require(j, "reg").get<std::string>();
  sensitivity_status_from_string(r.regularity);
  if (r.regular()) {
    if (r.jac_entries.size() != r.mask.kept_entries.size())
      throw std::runtime_error("regular record must carry one Jacobian entry per mask entry");
    for (std::size_t k = 0; k < r.jac_entries.size(); ++k)
      if (r.jac_entries[k].row != r.mask.kept_entries[k].first || r.jac_entries[k].col != r.mask.kept_entries[k].second)
        throw std::runtime_error("Jacobian entries do not follow the mask");
  } else if (!r.jac_entries.empty()) {
    throw std::runtime_error("non-regular record must not carry Jacobian entries");
  }
  return r;
}

}  // namespace

std::string dataset_to_jsonl(const Dataset& ds) {
  std::string out;
  const json header = {{"problem", ds.problem_name},
                       {"n", ds.n},
                       {"d", ds.d},
                       {"split", ds.split},
                       {"config", config_to_json(ds.config)},
                       {"stats",
                        {{"requested", ds.stats.requested},
                         {"solver_failures", ds.stats.solver_failures},
                         {"degenerate", ds.stats.degenerate}}},
                       {"records", ds.records.size()}};
  out += header.dump();
  out += '\n';
  for (const SolutionRecord& r : ds.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  Dataset ds;
  bool have_header = false;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        ds.problem_name = detail::require(j, "problem").get<std::string>();
        ds.n = detail::require(j, "n").get<int>();
        ds.d = detail::require(j, "d").get<int>();
        if (ds.n <= 0 || ds.d <= 0) throw std::runtime_error("header dimensions must be positive");
        if (j.contains("split")) ds.split = j.at("split").get<std::string>();
        ds.config = config_from_json(detail::require(j, "config"));
        if (j.contains("stats")) {
          const json& s = j.at("stats");
          ds.stats = {s.value("requested", 0), s.value("solver_failures", 0), s.value("degenerate", 0)};
        }
        expected = j.value("records", std::size_t{0});
        have_header = true;
      } else {
        ds.records.push_back(record_from_json(j, ds.n, ds.d));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error("dataset is empty (missing header line)");
  if (expected != ds.records.size())
    throw std::runtime_error("dataset header announces " + std::to_string(expected) + " records, found " +
                             std::to_string(ds.records.size()));
  return ds;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file_atomic(path, dataset_to_jsonl(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) { return dataset_from_jsonl(read_file(path)); }

}  // namespace sobolev
