// Copyright 2026 The kgcfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kgcfuse/pipeline.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "kgcfuse/score_store.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace kgcfuse {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path ShiftData(const std::string& tag) {
  const fs::path dir = testing::TempDir(tag) / "shift";
  testing::WriteShiftDataset(dir, {.entities = 40, .relations = 3, .seed = 5});
  return dir;
}

Config TwoModelConfig(const fs::path& data, const fs::path& out) {
  Config c = Config::Parse(R"(
[run]
seed = 11
[model.rotate]
dim = 8
epochs = 30
batch_size = 32
negatives = 8
lr = 0.02
gamma = 6
[model.path]
kind = pathcount
[ensemble]
lr = 0.01
negatives = 50
epochs = 2
[eval]
structural = path
textual = rotate
rerank_top_k = 5
[analysis]
probe_min_count = 1
)");
  c.Set("dataset", "dir", data.string());
  c.Set("run", "out", out.string());
  return c;
}

void RunAll(kgcfuse::Run& run) {
  run.Prepare();
  run.TrainBase();
  run.ExportScores();
  run.TrainEnsemble();
  run.Eval();
  run.Analyze();
  run.Significance();
}

Error::Kind ErrorKind(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return Error::Kind::kFormat;
}

TEST(PipelineTest, RerunIsByteIdentical) {
  const fs::path data = ShiftData("pipe_rerun");
  const fs::path root = testing::TempDir("pipe_rerun_out");
  std::ostringstream log1, log2;
  kgcfuse::Run a(TwoModelConfig(data, root / "a"), log1);
  Config cb = TwoModelConfig(data, root / "b");
  cb.Set("run", "threads", "3");
  kgcfuse::Run b(cb, log2);
  EXPECT_EQ(a.dir().filename(), b.dir().filename());
  RunAll(a);
  RunAll(b);
  for (const char* f : {"bundle/meta.json", "bundle/train.tsv", "static.json",
                        "ensemble.kgde", "scores/rotate.test.kgcs", "scores/path.test.kgcs",
                        "models/rotate.kgem", "reports/eval.json", "reports/analysis.json",
                        "reports/significance.json", "config.ini", "inputs.sha256"}) {
    if (std::string(f) == "config.ini") continue;  // run.threads and run.out differ
    ASSERT_TRUE(fs::exists(a.dir() / f)) << f;
    EXPECT_EQ(ReadAll(a.dir() / f), ReadAll(b.dir() / f)) << f;
  }
}

TEST(PipelineTest, WritesProvenance) {
  const fs::path data = ShiftData("pipe_prov");
  const Config c = TwoModelConfig(data, testing::TempDir("pipe_prov_out"));
  std::ostringstream log;
  kgcfuse::Run run(c, log);
  EXPECT_EQ(run.dir().filename().string(), c.Hash());
  EXPECT_EQ(ReadAll(run.dir() / "config.ini"), c.Canonical());
  EXPECT_EQ(ReadAll(run.dir() / "VERSION"), "kgcfuse " + ToolVersion() + "\n");
  const std::string inputs = ReadAll(run.dir() / "inputs.sha256");
  std::istringstream lines(inputs);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    EXPECT_EQ(line.find("  "), 64u);
  }
  EXPECT_EQ(n, 3u);
  EXPECT_NE(inputs.find("train.txt"), std::string::npos);
}

TEST(PipelineTest, EvalRanksMatchSortOracle) {
  const fs::path data = ShiftData("pipe_oracle");
  std::ostringstream log;
  kgcfuse::Run run(TwoModelConfig(data, testing::TempDir("pipe_oracle_out")), log);
  run.Prepare();
  run.TrainBase();
  run.ExportScores();
  run.TrainEnsemble();
  run.Eval();
  const Bundle b = LoadBundle(run.BundleDir());
  const auto& test = b.kg.split(Split::kTest);
  const QueryManifest manifest = MakeManifest(b.kg, b.dataset_id, Split::kTest);
  for (const char* name : {"rotate", "path"}) {
    const ScoreMatrix m = ImportScores(run.ScorePath(name, Split::kTest), manifest);
    const std::vector<double> ranks =
        ReadRanks(run.ReportDir() / "ranks" / (std::string(name) + ".txt"));
    ASSERT_EQ(ranks.size(), test.size());
    for (std::size_t q = 0; q < test.size(); ++q) {
      std::set<EntityId> known;
      for (Split s : {Split::kTrain, Split::kValid, Split::kTest, Split::kHeldOut}) {
        for (const Triple& t : b.kg.split(s)) {
          if (t.head == test[q].head && t.relation == test[q].relation) known.insert(t.tail);
        }
      }
      EXPECT_EQ(ranks[q], oracle::SortRank(m.Row(q), test[q].tail, known, false))
          << name << " query " << q;
    }
  }
  const json ev = json::parse(ReadAll(run.ReportDir() / "eval.json"));
  std::set<std::string> methods;
  for (const auto& m : ev.at("methods")) methods.insert(m.at("method").get<std::string>());
  for (const char* m : {"rotate", "path", "static", "dynamic", "rerank", "kgt5-route",
                        "split-select", "best-oracle"}) {
    EXPECT_TRUE(methods.contains(m)) << m;
  }
}

TEST(PipelineTest, MissingArtifactNamesProducer) {
  const fs::path data = ShiftData("pipe_missing");
  std::ostringstream log;
  kgcfuse::Run run(TwoModelConfig(data, testing::TempDir("pipe_missing_out")), log);
  std::string message;
  EXPECT_EQ(ErrorKind([&] { run.Eval(); }, &message), Error::Kind::kState);
  EXPECT_NE(message.find("kgcfuse prepare"), std::string::npos) << message;
  run.Prepare();
  EXPECT_EQ(ErrorKind([&] { run.ExportScores(); }, &message), Error::Kind::kState);
  EXPECT_NE(message.find("kgcfuse train-base"), std::string::npos) << message;
  EXPECT_EQ(ErrorKind([&] { run.TrainEnsemble(); }, &message), Error::Kind::kState);
  EXPECT_NE(message.find("kgcfuse export-scores"), std::string::npos) << message;
  EXPECT_EQ(ErrorKind([&] { run.Significance(); }, &message), Error::Kind::kState);
  EXPECT_NE(message.find("kgcfuse eval"), std::string::npos) << message;
}

TEST(PipelineTest, ConfigErrorsAreInvalidArgument) {
  const fs::path data = ShiftData("pipe_cfg");
  const fs::path out = testing::TempDir("pipe_cfg_out");
  std::ostringstream log;
  for (const char* bad : {"ensemble.models=rotate,ghost", "eval.tie=pessimistic",
                          "ensemble.train_split=test", "reachability.graph=all",
                          "ensemble.loss=hinge", "ensemble.marjin=1"}) {
    Config c = TwoModelConfig(data, out);
    c.SetAssignment(bad);
    EXPECT_EQ(ErrorKind([&] { kgcfuse::Run run(c, log); }), Error::Kind::kInvalidArgument) << bad;
  }
}

TEST(PipelineTest, TrainingNeedsSeed) {
  const fs::path data = ShiftData("pipe_seed");
  Config c = TwoModelConfig(data, testing::TempDir("pipe_seed_out"));
  Config unseeded;
  for (const char* k : {"dir"}) unseeded.Set("dataset", k, c.GetString("dataset", k, ""));
  unseeded.Set("run", "out", c.GetString("run", "out", ""));
  unseeded.Set("model.path", "kind", "pathcount");
  std::ostringstream log;
  kgcfuse::Run run(unseeded, log);
  run.Prepare();
  std::string message;
  EXPECT_EQ(ErrorKind([&] { run.TrainBase(); }, &message), Error::Kind::kInvalidArgument);
  EXPECT_NE(message.find("seed"), std::string::npos);
}

TEST(PipelineTest, SingleModelStaticEqualsModel) {
  const fs::path data = ShiftData("pipe_single");
  Config c = TwoModelConfig(data, testing::TempDir("pipe_single_out"));
  c.Set("ensemble", "models", "rotate");
  c.Set("eval", "structural", "");
  c.Set("eval", "textual", "");
  std::ostringstream log;
  kgcfuse::Run run(c, log);
  run.Prepare();
  run.TrainBase();
  run.ExportScores();
  run.TrainEnsemble();
  run.Eval();
  EXPECT_FALSE(fs::exists(run.EnsemblePath()));
  EXPECT_EQ(ReadAll(run.ReportDir() / "ranks" / "static.txt"),
            ReadAll(run.ReportDir() / "ranks" / "rotate.txt"));
  const json ev = json::parse(ReadAll(run.ReportDir() / "eval.json"));
  json static_all, rotate_all;
  for (const auto& m : ev.at("methods")) {
    if (m.at("method") == "static") static_all = m.at("all");
    if (m.at("method") == "rotate") rotate_all = m.at("all");
  }
  EXPECT_EQ(static_all, rotate_all);
}

TEST(PipelineTest, EnsembleConfigEchoesDefaults) {
  const fs::path data = ShiftData("pipe_echo");
  Config c = Config::Parse("[run]\nseed = 1\n[model.path]\nkind = pathcount\n"
                           "[model.short]\nkind = pathcount\nhop_weights = 1\n");
  c.Set("dataset", "dir", data.string());
  c.Set("run", "out", testing::TempDir("pipe_echo_out").string());
  std::ostringstream log;
  kgcfuse::Run run(c, log);
  run.Prepare();
  run.TrainBase();
  run.ExportScores();
  run.TrainEnsemble();
  const json config = json::parse(ReadAll(run.dir() / "ensemble.json")).at("config");
  EXPECT_EQ(config.at("lr").get<double>(), 5e-5);
  EXPECT_EQ(config.at("negatives").get<std::size_t>(), 10000u);
  EXPECT_EQ(config.at("hidden").get<std::size_t>(), 16u);
  EXPECT_EQ(config.at("init"), json::parse("[0.0, 2.0]"));
  EXPECT_EQ(config.at("epochs").get<int>(), 1);
  EXPECT_EQ(config.at("variant").get<std::string>(), "MeanVar");
  EXPECT_EQ(config.at("train_split").get<std::string>(), "valid");
  EXPECT_NE(log.str().find("ensemble config"), std::string::npos);
}

TEST(ExperimentTest, WeightModelIsNeverTheDefaultAnchor) {
  const fs::path data = ShiftData("exp_weight");
  Config c = TwoModelConfig(data, testing::TempDir("exp_weight_out"));
  // Sections sort, so the default model order and anchor start with path.
  Experiment e = Experiment::FromConfig(c);
  EXPECT_EQ(e.ensemble.models, (std::vector<std::string>{"path", "rotate"}));
  EXPECT_EQ(e.ensemble.anchor, "path");
  EXPECT_EQ(e.weight_model, "rotate");
  c.Set("ensemble", "anchor", "rotate");
  e = Experiment::FromConfig(c);
  EXPECT_EQ(e.weight_model, "path");
  c.Set("analysis", "weight_model", "rotate");
  EXPECT_EQ(Experiment::FromConfig(c).weight_model, "rotate");
}

TEST(ExperimentTest, ShippedConfigResolves) {
  const Config c = Config::Load(fs::path(KGCFUSE_SOURCE_DIR) / "configs" / "wn18rr_desk.ini");
  const Experiment e = Experiment::FromConfig(c);
  EXPECT_EQ(e.dataset_id, "wn18rr");
  EXPECT_EQ(e.ensemble.anchor, "rotate");
  EXPECT_EQ(e.weight_model, "path");
  ASSERT_NE(e.FindModel("rotate"), nullptr);
  EXPECT_EQ(e.FindModel("rotate")->train.dim, 256);
  EXPECT_EQ(e.ensemble.dynamic.learning_rate, 5e-5);
  EXPECT_EQ(e.eval.tie, TieMode::kMean);
}

TEST(PipelineTest, AblationCoversAllVariants) {
  const fs::path data = ShiftData("pipe_ablate");
  std::ostringstream log;
  kgcfuse::Run run(TwoModelConfig(data, testing::TempDir("pipe_ablate_out")), log);
  run.Prepare();
  run.TrainBase();
  run.ExportScores();
  run.AblateFeatures();
  const json ab = json::parse(ReadAll(run.ReportDir() / "ablation.json"));
  std::vector<std::string> names;
  for (const auto& v : ab) names.push_back(v.at("variant").get<std::string>());
  std::vector<std::string> expected;
  for (FeatureVariant v : AllFeatureVariants()) expected.emplace_back(FeatureVariantName(v));
  EXPECT_EQ(names, expected);
  EXPECT_EQ(names.size(), 6u);
}

int Cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KGCFUSE_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  const fs::path tmp = testing::TempDir("cli_codes");
  const fs::path log = tmp / "log.txt";
  EXPECT_EQ(Cli("--version", log), 0);
  EXPECT_NE(ReadAll(log).find("kgcfuse " + ToolVersion()), std::string::npos);
  fs::create_directories(tmp / "empty");
  const std::string out = " --out " + (tmp / "runs").string();
  EXPECT_EQ(Cli("prepare " + (tmp / "empty").string() + out, log), 2);
  EXPECT_NE(ReadAll(log).find("kgcfuse: error:"), std::string::npos);
  EXPECT_EQ(Cli("eval --set dataset.id=x" + out, log), 2);
  EXPECT_NE(ReadAll(log).find("kgcfuse prepare"), std::string::npos);
  EXPECT_EQ(Cli("eval --set ensemble.bogus=1" + out, log), 2);
  EXPECT_EQ(Cli("eval --config " + (tmp / "none.ini").string() + out, log), 2);
}

TEST(CliTest, ChainOfCommandsSharesRunDirectory) {
  const fs::path data = ShiftData("cli_chain");
  const fs::path tmp = testing::TempDir("cli_chain_out");
  const Config c = TwoModelConfig(data, tmp / "runs");
  {
    std::ofstream(tmp / "exp.ini") << c.Canonical();
  }
  const std::string flags = " --config " + (tmp / "exp.ini").string();
  const fs::path log = tmp / "log.txt";
  for (const char* cmd : {"prepare", "train-base", "export-scores", "train-ensemble", "eval",
                          "analyze", "significance"}) {
    ASSERT_EQ(Cli(std::string(cmd) + flags, log), 0) << cmd << "\n" << ReadAll(log);
  }
  const fs::path dir = tmp / "runs" / c.Hash();
  EXPECT_TRUE(fs::exists(dir / "reports" / "significance.txt"));
  EXPECT_NE(ReadAll(log).find("run directory " + dir.string()), std::string::npos);
  // Same results as the library path with a different thread count.
  Config threaded = c;
  threaded.Set("run", "threads", "2");
  threaded.Set("run", "out", (tmp / "lib").string());
  std::ostringstream text;
  kgcfuse::Run run(threaded, text);
  RunAll(run);
  EXPECT_EQ(ReadAll(dir / "reports" / "eval.json"),
            ReadAll(run.ReportDir() / "eval.json"));
}

}  // namespace
}  // namespace kgcfuse
