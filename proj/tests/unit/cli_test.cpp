#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sobolev/cli.hpp"
#include "sobolev/datagen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using sobolev::read_file;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = sobolev::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(SOBOLEV_TEST_TMPDIR) / ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  void generate(const std::string& out, const std::string& seed = "3", const std::string& threads = "1") {
    const Outcome r = run({"generate", "--problem", "toy-qp", "--train", "48", "--val", "8", "--test", "16", "--seed", seed,
                       "--threads", threads, "--out", path(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndVersionExitZero) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"train", "--help"}).code, 0);
  const Outcome v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_FALSE(v.out.empty());
}

TEST_F(Cli, UnknownFlagPrintsUsageAndExitsOne) {
  const Outcome r = run({"generate", "--problem", "toy-qp", "--no-such-flag", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
}

TEST_F(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(run({"generate", "--out", path("x")}).code, 1);  // --problem missing
  EXPECT_EQ(run({"generate", "--problem", "nope", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"generate", "--problem", "toy-qp", "--train", "ten", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"generate", "--problem", "toy-qp", "--sparsity", "1.5", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"generate", "--problem", "toy-qp", "--box", "0.5", "--line", "0.1", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"solve", "--problem", "toy-qp", "--p", "1,2,3"}).code, 1);
  EXPECT_EQ(run({"train", "--data", path("missing.jsonl")}).code, 1);
  EXPECT_FALSE(fs::exists(path("x/train.jsonl")));
}

TEST_F(Cli, GenerateWritesThreeSplitsAndOneManifest) {
  const Outcome r = run({"generate", "--problem", "toy-qp", "--train", "40", "--val", "10", "--test", "10", "--sparsity",
                     "0.95", "--seed", "7", "--out", path("data")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* split : {"train", "val", "test"}) {
    const sobolev::Dataset ds = sobolev::read_dataset(path(std::string("data/") + split + ".jsonl"));
    EXPECT_EQ(ds.split, split);
    EXPECT_EQ(ds.problem_name, "toy-qp");
    EXPECT_DOUBLE_EQ(ds.config.sparsity, 0.95);
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(path("data"))) files += e.is_regular_file();
  EXPECT_EQ(files, 4u);

  const json m = json::parse(read_file(path("data/manifest.json")));
  EXPECT_EQ(m["subcommand"], "generate");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["config"]["sparsity"], 0.95);
  EXPECT_EQ(m["config"]["train"], 40);
  EXPECT_EQ(m["outputs"].size(), 3u);
  for (const char* key : {"version", "started", "finished", "inputs"}) EXPECT_TRUE(m.contains(key)) << key;
}

TEST_F(Cli, GenerateIsReproducibleAndThreadIndependent) {
  generate("a", "5", "1");
  generate("b", "5", "3");
  generate("c", "6", "1");
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    EXPECT_EQ(read_file(path(std::string("a/") + f)), read_file(path(std::string("b/") + f))) << f;
    EXPECT_NE(read_file(path(std::string("a/") + f)), read_file(path(std::string("c/") + f))) << f;
  }
}

TEST_F(Cli, SolvePrintsSolutionAndSensitivity) {
  const Outcome r = run({"solve", "--problem", "toy-qp-2", "--p", "1.5,1.25"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["status"], "converged");
  EXPECT_NEAR(j["x"][0].get<double>(), 1.5, 1e-8);
  EXPECT_NEAR(j["x"][1].get<double>(), 1.25, 1e-8);
  EXPECT_EQ(j["sensitivity"]["status"], "regular");
  EXPECT_NEAR(j["sensitivity"]["dx_dp"][0][0].get<double>(), 1.0, 1e-8);
  EXPECT_NEAR(j["sensitivity"]["dx_dp"][0][1].get<double>(), 0.0, 1e-8);
  EXPECT_NEAR(j["sensitivity"]["dx_dp"][1][1].get<double>(), 1.0, 1e-8);

  ASSERT_EQ(run({"solve", "--problem", "acopf3", "--out", path("s/opf.json")}).code, 0);
  EXPECT_EQ(json::parse(read_file(path("s/opf.json")))["status"], "converged");
  EXPECT_TRUE(fs::exists(path("s/opf.manifest.json")));
}

TEST_F(Cli, SolveFailureExitsTwo) {
  // Too tight a tolerance to reach within the iteration limit in double precision.
  const Outcome r = run({"solve", "--problem", "acopf3", "--tol", "1e-300"});
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}

TEST_F(Cli, TrainEvalPipelineIsByteReproducible) {
  generate("data");
  auto pipeline = [&](const std::string& tag, const std::string& threads) {
    const Outcome t = run({"train", "--data", path("data/train.jsonl"), "--val", path("data/val.jsonl"), "--mode",
                       "sobolev", "--epochs", "15", "--batch", "8", "--widths", "12,6", "--seed", "2", "--threads",
                       threads, "--out", path(tag + "/model.json")});
    ASSERT_EQ(t.code, 0) << t.err;
    const Outcome e = run({"eval", "--model", path(tag + "/model.json"), "--data", path("data/test.jsonl"), "--threads",
                       threads, "--out", path(tag + "/eval.json")});
    ASSERT_EQ(e.code, 0) << e.err;
  };
  pipeline("r1", "1");
  pipeline("r2", "2");
  for (const char* f : {"model.json", "model.report.json", "model.report.csv", "eval.json", "eval.csv"})
    EXPECT_EQ(read_file(path(std::string("r1/") + f)), read_file(path(std::string("r2/") + f))) << f;

  const json m = json::parse(read_file(path("r1/model.manifest.json")));
  EXPECT_EQ(m["subcommand"], "train");
  EXPECT_DOUBLE_EQ(m["config"]["lambda"].get<double>(), 0.30);
  EXPECT_EQ(m["config"]["widths"], json::array({12, 6}));
  const std::string csv = read_file(path("r1/model.report.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,value,jacobian,total,val_mse");
}

TEST_F(Cli, ManifestReplayReproducesOutputs) {
  generate("data");
  ASSERT_EQ(run({"train", "--data", path("data/train.jsonl"), "--epochs", "5", "--widths", "8", "--out",
                 path("m/model.json")})
                .code,
            0);
  const std::string first = read_file(path("m/model.json"));
  fs::remove(path("m/model.json"));
  const Outcome r = run({"train", "--config", path("m/model.manifest.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(path("m/model.json")), first);

  EXPECT_EQ(run({"eval", "--config", path("m/model.manifest.json")}).code, 1);  // wrong subcommand
}

TEST_F(Cli, ConfigPrecedenceFlagsOverFileOverDefaults) {
  generate("data");
  std::ofstream(path("cfg.json")) << R"({"epochs": 3, "seed": 11, "widths": [5], "mode": "sobolev"})";
  const Outcome r = run({"train", "--config", path("cfg.json"), "--data", path("data/train.jsonl"), "--seed", "4",
                     "--out", path("m/model.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(read_file(path("m/model.manifest.json")));
  EXPECT_EQ(m["config"]["epochs"], 3);     // file
  EXPECT_EQ(m["config"]["seed"], 4);       // flag beats file
  EXPECT_EQ(m["config"]["batch"], 32);     // default
  EXPECT_EQ(m["config"]["widths"], json::array({5}));
  const json report = json::parse(read_file(path("m/model.report.json")));
  EXPECT_EQ(report["train"].size(), 3u);

  std::ofstream(path("bad.json")) << R"({"epochs": 3, "learning_rate": 0.1})";
  EXPECT_EQ(run({"train", "--config", path("bad.json"), "--data", path("data/train.jsonl")}).code, 1);
  std::ofstream(path("badtype.json")) << R"({"epochs": "three"})";
  EXPECT_EQ(run({"train", "--config", path("badtype.json"), "--data", path("data/train.jsonl")}).code, 1);
}

TEST_F(Cli, DivergedTrainingExitsTwo) {
  generate("data");
  const Outcome r = run({"train", "--data", path("data/train.jsonl"), "--lr", "1e300", "--activation", "relu", "--epochs",
                     "3", "--out", path("m/model.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("m/model.json")));
}

TEST_F(Cli, CompareWritesPerInstanceRmi) {
  ASSERT_EQ(run({"generate", "--problem", "markowitz-3", "--train", "32", "--val", "0", "--test", "12", "--seed", "1",
                 "--out", path("data")})
                .code,
            0);
  for (const char* mode : {"value", "sobolev"})
    ASSERT_EQ(run({"train", "--data", path("data/train.jsonl"), "--mode", mode, "--epochs", "5", "--widths", "8",
                   "--out", path(std::string(mode) + ".json")})
                  .code,
              0);
  const Outcome r = run({"compare", "--benchmark", path("value.json"), "--sobolev", path("sobolev.json"), "--data",
                     path("data/test.jsonl"), "--out", path("cmp/rmi.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read_file(path("cmp/rmi.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "instance,max_inf_benchmark,max_inf_sobolev,rmi");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(sobolev::read_dataset(path("data/test.jsonl")).records.size()));
  EXPECT_TRUE(fs::exists(path("cmp/rmi.json")));
  EXPECT_TRUE(fs::exists(path("cmp/rmi.manifest.json")));
}

TEST_F(Cli, VerifyBoundsWritesTable) {
  const Outcome r = run({"verify-bounds", "--points", "9", "--grid", "4096", "--out", path("b/bounds.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(read_file(path("b/bounds.json")));
  ASSERT_EQ(j["bounds"].size(), 4u);
  for (const json& b : j["bounds"]) EXPECT_TRUE(b["pass"].get<bool>());
  EXPECT_TRUE(fs::exists(path("b/bounds.csv")));
}

TEST_F(Cli, AblateMaskEmitsFourRows) {
  generate("data");
  const Outcome r = run({"ablate-mask", "--data", path("data/train.jsonl"), "--test", path("data/test.jsonl"), "--epochs",
                     "5", "--widths", "8", "--out", path("abl.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read_file(path("abl.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "sparsity,kept_fraction,kept_entries,mse");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(run({"ablate-mask", "--data", path("data/train.jsonl"), "--test", path("data/test.jsonl"), "--kept",
                 "0", "--out", path("abl2.csv")})
                .code,
            1);
}
