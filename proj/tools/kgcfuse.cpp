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

// kgcfuse command line: dataset preparation, base models, score export,
// ensemble training, evaluation and analysis.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgcfuse/common.hpp"
#include "kgcfuse/config.hpp"
#include "kgcfuse/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::vector<std::string> overrides;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "experiment config file");
  cmd->add_option("--seed", flags.seed, "random seed (overrides run.seed)");
  cmd->add_option("--out", flags.out, "output root (overrides run.out)");
  cmd->add_option("--threads", flags.threads, "worker threads (overrides run.threads)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", flags.overrides,
                  "override a config value, e.g. --set ensemble.margin=0.2");
}

kgcfuse::Config ResolveConfig(const CommonFlags& flags,
                              const std::optional<std::string>& dataset_dir) {
  kgcfuse::Config config;
  if (!flags.config.empty()) config = kgcfuse::Config::Load(flags.config);
  for (const std::string& o : flags.overrides) config.SetAssignment(o);
  if (dataset_dir) config.Set("dataset", "dir", *dataset_dir);
  if (flags.seed) config.Set("run", "seed", std::to_string(*flags.seed));
  if (flags.out) config.Set("run", "out", *flags.out);
  if (flags.threads) config.Set("run", "threads", std::to_string(*flags.threads));
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgcfuse: query-dependent ensembling of knowledge graph completion models"};
  app.set_version_flag("--version", "kgcfuse " + kgcfuse::ToolVersion());
  app.require_subcommand(1);

  CommonFlags flags;
  std::optional<std::string> dataset_dir;
  std::optional<std::string> only_model;

  auto* prepare = app.add_subcommand("prepare", "index a dataset directory");
  prepare->add_option("dataset_dir", dataset_dir,
                      "directory with train.txt, valid.txt, test.txt");
  auto* train_base = app.add_subcommand("train-base", "train the in-repo base models");
  train_base->add_option("--model", only_model, "train only this [model.NAME]");
  auto* export_scores =
      app.add_subcommand("export-scores", "write or import per-query score matrices");
  auto* train_ensemble =
      app.add_subcommand("train-ensemble", "tune the static and train the dynamic ensemble");
  auto* eval = app.add_subcommand("eval", "evaluate every method on the test split");
  auto* analyze = app.add_subcommand("analyze", "split, weight, feature and probe analyses");
  auto* ablate =
      app.add_subcommand("ablate-features", "retrain the ensemble per feature variant");
  auto* significance =
      app.add_subcommand("significance", "paired t-test of dynamic vs static over folds");
  for (CLI::App* cmd : {prepare, train_base, export_scores, train_ensemble, eval, analyze,
                        ablate, significance}) {
    AddCommonFlags(cmd, flags);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const kgcfuse::Config config = ResolveConfig(flags, dataset_dir);
    kgcfuse::Run run(config, std::cout);
    std::cerr << "run directory " << run.dir().string() << "\n";
    if (prepare->parsed()) run.Prepare();
    if (train_base->parsed()) run.TrainBase(only_model);
    if (export_scores->parsed()) run.ExportScores();
    if (train_ensemble->parsed()) run.TrainEnsemble();
    if (eval->parsed()) run.Eval();
    if (analyze->parsed()) run.Analyze();
    if (ablate->parsed()) run.AblateFeatures();
    if (significance->parsed()) run.Significance();
  } catch (const kgcfuse::Error& e) {
    std::cerr << "kgcfuse: error: " << e.what() << "\n";
    const auto kind = e.kind();
    const bool user_error = kind == kgcfuse::Error::Kind::kInvalidArgument ||
                            kind == kgcfuse::Error::Kind::kParse ||
                            kind == kgcfuse::Error::Kind::kIo ||
                            kind == kgcfuse::Error::Kind::kState;
    return user_error ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "kgcfuse: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
