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

// The experiment pipeline behind the kgcfuse command line. Every command
// works inside a run directory <out>/<config hash>/ and picks up the
// artifacts of the commands before it:
//
//   prepare          bundle/            indexed dataset + reachability flags
//   train-base       models/NAME.kgem   in-repo base models
//   export-scores    scores/NAME.SPLIT.kgcs
//   train-ensemble   ensemble.kgde, static.json
//   eval             reports/eval.{txt,json}, reports/ranks/METHOD.txt
//   analyze          reports/analysis.{txt,json}
//   ablate-features  reports/ablation.{txt,json}
//   significance     reports/significance.{txt,json}

#ifndef KGCFUSE_PIPELINE_HPP_
#define KGCFUSE_PIPELINE_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgcfuse/baselines.hpp"
#include "kgcfuse/config.hpp"
#include "kgcfuse/dynasemble.hpp"
#include "kgcfuse/kg.hpp"
#include "kgcfuse/metrics.hpp"
#include "kgcfuse/models.hpp"

namespace kgcfuse {

std::string ToolVersion();

// A prepared dataset: augmented graph plus the test reachability partition.
struct Bundle {
  std::string dataset_id;
  KnowledgeGraph kg;
  ReachabilityConfig reachability;
  ReachabilitySplit reach;
};

// Loads <dir>/{train,valid,test}.txt, optionally holds out part of train,
// adds inverses and computes the reachability partition.
Bundle BuildBundle(const std::filesystem::path& dataset_dir,
                   const std::string& dataset_id, const LoadOptions& options,
                   double heldout_fraction, std::uint64_t seed,
                   const ReachabilityConfig& reachability);

// Byte-identical output for identical bundles.
void SaveBundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle LoadBundle(const std::filesystem::path& dir);

std::string BundleSummary(const Bundle& bundle);

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::kRotatE;
  TrainConfig train;
  std::vector<double> hop_weights = {1.0, 0.5};
  double saturation = 10.0;
};

struct EnsembleSpec {
  std::vector<std::string> models;
  std::string anchor;
  DynaSembleConfig dynamic;
  Split train_split = Split::kValid;
  std::vector<double> static_grid;
};

struct EvalSpec {
  TieMode tie = TieMode::kOptimistic;
  std::string structural;
  std::string textual;
  std::size_t rerank_top_k = 100;
};

// Resolved view of a configuration with defaults filled in.
struct Experiment {
  Config config;
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path out = "runs";
  std::filesystem::path dataset_dir;
  std::string dataset_id;
  LoadOptions load;
  double heldout_fraction = 0.0;
  ReachabilityConfig reachability;
  std::vector<ModelSpec> models;
  // name -> per-split score matrix path
  std::vector<std::pair<std::string, std::map<Split, std::filesystem::path>>> imports;
  EnsembleSpec ensemble;
  EvalSpec eval;
  std::string weight_model;
  std::size_t probe_min_count = 20;
  int probe_draws = 1;
  bool probe_include_inverses = true;
  int significance_folds = 5;
  std::uint64_t significance_seed = 0;

  static Experiment FromConfig(const Config& config);
  const ModelSpec* FindModel(const std::string& name) const;
  bool IsImported(const std::string& name) const;
  std::size_t AnchorIndex() const;
  std::size_t ModelIndex(const std::string& name) const;
};

class Run {
 public:
  // Creates <out>/<hash>/ and writes the resolved config, tool version and
  // input checksums into it.
  Run(const Config& config, std::ostream& log);

  const Experiment& experiment() const { return exp_; }
  const std::filesystem::path& dir() const { return dir_; }

  void Prepare();
  void TrainBase(const std::optional<std::string>& only_model = std::nullopt);
  void ExportScores();
  void TrainEnsemble();
  void Eval();
  void Analyze();
  void AblateFeatures();
  void Significance();

  // Artifact locations.
  std::filesystem::path BundleDir() const { return dir_ / "bundle"; }
  std::filesystem::path ModelPath(const std::string& name) const;
  std::filesystem::path ScorePath(const std::string& name, Split split) const;
  std::filesystem::path EnsemblePath() const { return dir_ / "ensemble.kgde"; }
  std::filesystem::path StaticPath() const { return dir_ / "static.json"; }
  std::filesystem::path ReportDir() const { return dir_ / "reports"; }

 private:
  const Bundle& LoadedBundle();
  const FilterIndex& Filter();
  std::vector<ScoreMatrix> LoadMatrices(Split split);
  StaticEnsemble LoadStatic() const;
  void WriteProvenance() const;

  Experiment exp_;
  std::filesystem::path dir_;
  std::ostream& log_;
  std::optional<Bundle> bundle_;
  std::optional<FilterIndex> filter_;
};

// Reads one rank per line, as written by eval.
std::vector<double> ReadRanks(const std::filesystem::path& path);

}  // namespace kgcfuse

#endif  // KGCFUSE_PIPELINE_HPP_
