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

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "kgcfuse/analysis.hpp"
#include "kgcfuse/digest.hpp"
#include "kgcfuse/random.hpp"
#include "kgcfuse/score_store.hpp"

namespace kgcfuse {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string ToolVersion() { return KGCFUSE_VERSION; }

namespace {

constexpr Split kAllSplits[] = {Split::kTrain, Split::kValid, Split::kTest,
                                Split::kHeldOut};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(Error::Kind::kIo, "cannot open " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return text.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(Error::Kind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) Fail(Error::Kind::kIo, "write failed for " + path.string());
}

void RequireArtifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    Fail(Error::Kind::kState, "missing " + path.string() + "; run `kgcfuse " +
                                  producer + "` with the same config first");
  }
}

std::string TriplesText(std::span<const Triple> triples) {
  std::string out;
  for (const Triple& t : triples) {
    out += std::to_string(t.head) + '\t' + std::to_string(t.relation) + '\t' +
           std::to_string(t.tail) + '\n';
  }
  return out;
}

std::vector<Triple> ParseTriples(const std::string& text, const std::string& source) {
  std::vector<Triple> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Triple t;
    if (!(fields >> t.head >> t.relation >> t.tail)) {
      Fail(Error::Kind::kParse, source + ":" + std::to_string(line_no) +
                                    ": expected three integer ids");
    }
    out.push_back(t);
  }
  return out;
}

std::string FormatDouble(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string_view TieName(TieMode tie) {
  return tie == TieMode::kMean ? "mean" : "optimistic";
}

ojson MetricsJson(const MetricsReport& m) { return ojson::parse(m.ToJson()); }

}  // namespace

// --- Bundle ---------------------------------------------------------------------

Bundle BuildBundle(const fs::path& dataset_dir, const std::string& dataset_id,
                   const LoadOptions& options, double heldout_fraction,
                   std::uint64_t seed, const ReachabilityConfig& reachability) {
  if (dataset_dir.empty() || !fs::is_directory(dataset_dir)) {
    Fail(Error::Kind::kIo, "dataset directory '" + dataset_dir.string() + "' not found");
  }
  for (const char* name : {"train.txt", "valid.txt", "test.txt"}) {
    if (!fs::exists(dataset_dir / name)) {
      Fail(Error::Kind::kIo, "dataset directory " + dataset_dir.string() +
                                 " has no " + name +
                                 " (expected train.txt, valid.txt, test.txt)");
    }
  }
  Bundle b;
  b.dataset_id = dataset_id;
  b.reachability = reachability;
  KnowledgeGraph kg = LoadDataset(dataset_dir / "train.txt", dataset_dir / "valid.txt",
                                  dataset_dir / "test.txt", options);
  if (kg.split(Split::kTrain).empty()) {
    Fail(Error::Kind::kParse, "train split of " + dataset_dir.string() + " is empty");
  }
  if (heldout_fraction > 0.0) {
    kg = HoldOutTrain(std::move(kg), heldout_fraction, DeriveSeed(seed, 7));
  }
  b.kg = AugmentInverses(std::move(kg), options);
  b.reach = ComputeReachabilitySplit(b.kg, reachability);
  return b;
}

void SaveBundle(const Bundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  const KnowledgeGraph& kg = bundle.kg;
  WriteFile(dir / "entities.tsv", kg.entities.Dump());
  WriteFile(dir / "relations.tsv", kg.relations.Dump());
  for (Split s : kAllSplits) {
    WriteFile(dir / (std::string(SplitName(s)) + ".tsv"), TriplesText(kg.split(s)));
  }
  std::string flags;
  for (std::uint8_t f : bundle.reach.is_reachable) flags += f ? "1\n" : "0\n";
  WriteFile(dir / "reachable.txt", flags);

  ojson meta;
  meta["dataset"] = bundle.dataset_id;
  meta["has_inverses"] = kg.has_inverses;
  meta["num_base_relations"] = kg.num_base_relations;
  meta["reachability"] = {
      {"max_path_length", bundle.reachability.max_path_length},
      {"graph", bundle.reachability.graph_source == GraphSource::kTrain ? "train"
                                                                         : "train+valid"},
      {"inverse_edges", bundle.reachability.use_inverse_edges}};
  const LoadReport& r = kg.load_report;
  meta["load_report"] = {{"unseen", r.unseen.size()},
                         {"duplicates_train", r.duplicates[0]},
                         {"duplicates_valid", r.duplicates[1]},
                         {"duplicates_test", r.duplicates[2]},
                         {"cross_split_overlaps", r.cross_split_overlaps}};
  WriteFile(dir / "meta.json", meta.dump(2) + "\n");
  std::string unseen;
  for (const UnseenEntry& u : r.unseen) {
    unseen += std::string(SplitName(u.split)) + '\t' + std::to_string(u.line) + '\t' +
              (u.is_relation ? "relation" : "entity") + '\t' + u.name + '\n';
  }
  WriteFile(dir / "unseen.tsv", unseen);
  WriteFile(dir / "summary.txt", BundleSummary(bundle));
}

Bundle LoadBundle(const fs::path& dir) {
  RequireArtifact(dir / "meta.json", "prepare");
  Bundle b;
  const ojson meta = ojson::parse(ReadFile(dir / "meta.json"));
  b.dataset_id = meta.at("dataset").get<std::string>();
  KnowledgeGraph& kg = b.kg;
  kg.entities = Dictionary::FromDump(ReadFile(dir / "entities.tsv"));
  kg.relations = Dictionary::FromDump(ReadFile(dir / "relations.tsv"));
  kg.has_inverses = meta.at("has_inverses").get<bool>();
  kg.num_base_relations = meta.at("num_base_relations").get<std::size_t>();
  for (Split s : kAllSplits) {
    const fs::path p = dir / (std::string(SplitName(s)) + ".tsv");
    kg.split(s) = ParseTriples(ReadFile(p), p.string());
    for (const Triple& t : kg.split(s)) {
      if (t.head >= kg.num_entities() || t.tail >= kg.num_entities() ||
          t.relation >= kg.num_relations()) {
        Fail(Error::Kind::kFormat, p.string() + ": id out of range");
      }
    }
  }
  kg.adjacency = Adjacency(kg.num_entities(), kg.split(Split::kTrain));
  const auto& rc = meta.at("reachability");
  b.reachability.max_path_length = rc.at("max_path_length").get<int>();
  b.reachability.graph_source = rc.at("graph").get<std::string>() == "train"
                                    ? GraphSource::kTrain
                                    : GraphSource::kTrainValid;
  b.reachability.use_inverse_edges = rc.at("inverse_edges").get<bool>();
  const std::string flags = ReadFile(dir / "reachable.txt");
  const auto& test = kg.split(Split::kTest);
  for (std::size_t i = 0, q = 0; i < flags.size(); ++i) {
    if (flags[i] == '\n') continue;
    if (q >= test.size()) Fail(Error::Kind::kFormat, "reachable.txt longer than test split");
    const bool reach = flags[i] == '1';
    b.reach.is_reachable.push_back(reach ? 1 : 0);
    (reach ? b.reach.reachable : b.reach.unreachable).push_back(test[q]);
    ++q;
  }
  if (b.reach.is_reachable.size() != test.size()) {
    Fail(Error::Kind::kFormat, "reachable.txt does not cover the test split");
  }
  return b;
}

std::string BundleSummary(const Bundle& bundle) {
  const KnowledgeGraph& kg = bundle.kg;
  const std::size_t inv = kg.has_inverses ? 2 : 1;
  std::ostringstream out;
  out << "dataset            " << bundle.dataset_id << "\n"
      << "entities           " << kg.num_entities() << "\n"
      << "relations          " << kg.num_base_relations << " (" << kg.num_relations()
      << " with inverses)\n"
      << "train triples      " << kg.split(Split::kTrain).size() / inv << "\n"
      << "valid triples      " << kg.split(Split::kValid).size() / inv << "\n"
      << "test triples       " << kg.split(Split::kTest).size() / inv << "\n"
      << "held-out triples   " << kg.split(Split::kHeldOut).size() / inv << "\n"
      << "test queries       " << kg.split(Split::kTest).size() << "\n"
      << "reachable (l=" << bundle.reachability.max_path_length << ")      "
      << bundle.reach.reachable.size() << "\n"
      << "unreachable        " << bundle.reach.unreachable.size() << "\n"
      << "unseen entries     " << kg.load_report.unseen.size() << "\n"
      << "duplicate lines    "
      << kg.load_report.duplicates[0] + kg.load_report.duplicates[1] +
             kg.load_report.duplicates[2]
      << "\n"
      << "split overlaps     " << kg.load_report.cross_split_overlaps << "\n";
  return out.str();
}

// --- Experiment -------------------------------------------------------------------

Experiment Experiment::FromConfig(const Config& config) {
  config.CheckSchema();
  Experiment e;
  e.config = config;
  e.seed = static_cast<std::uint64_t>(config.GetInt("run", "seed", 0));
  e.threads = static_cast<int>(config.GetInt("run", "threads", 1));
  Require(e.threads >= 1, "run.threads must be >= 1");
  e.out = config.GetString("run", "out", "runs");

  e.dataset_dir = config.GetString("dataset", "dir", "");
  e.dataset_id = config.GetString("dataset", "id",
                                  e.dataset_dir.empty()
                                      ? "dataset"
                                      : fs::path(e.dataset_dir).lexically_normal()
                                            .filename().string());
  if (e.dataset_id.empty()) e.dataset_id = "dataset";
  e.load.inverse_suffix = config.GetString("dataset", "inverse_suffix", "_inv");

  e.reachability.max_path_length =
      static_cast<int>(config.GetInt("reachability", "max_path_length", 2));
  const std::string graph = config.GetString("reachability", "graph", "train");
  if (graph == "train") {
    e.reachability.graph_source = GraphSource::kTrain;
  } else if (graph == "train+valid") {
    e.reachability.graph_source = GraphSource::kTrainValid;
  } else {
    Fail(Error::Kind::kInvalidArgument,
         "reachability.graph must be train or train+valid, got '" + graph + "'");
  }
  e.reachability.use_inverse_edges = config.GetBool("reachability", "inverse_edges", true);

  for (const std::string& name : config.SectionsWithPrefix("model")) {
    const std::string s = "model." + name;
    ModelSpec m;
    m.name = name;
    m.kind = ParseModelKind(config.GetString(s, "kind", name));
    TrainConfig& t = m.train;
    t.dim = static_cast<int>(config.GetInt(s, "dim", t.dim));
    t.epochs = static_cast<int>(config.GetInt(s, "epochs", t.epochs));
    t.batch_size = static_cast<int>(config.GetInt(s, "batch_size", t.batch_size));
    t.negatives_per_positive =
        static_cast<int>(config.GetInt(s, "negatives", t.negatives_per_positive));
    t.learning_rate = config.GetDouble(s, "lr", t.learning_rate);
    t.seed = static_cast<std::uint64_t>(
        config.GetInt(s, "seed", static_cast<std::int64_t>(e.seed)));
    t.adversarial_temperature =
        config.GetDouble(s, "adversarial_temperature", t.adversarial_temperature);
    t.gamma = config.GetDouble(s, "gamma", t.gamma);
    t.regularization = config.GetDouble(
        s, "regularization", m.kind == ModelKind::kComplEx ? t.regularization : 0.0);
    if (config.Has(s, "hop_weights")) m.hop_weights = config.GetDoubleList(s, "hop_weights");
    m.saturation = config.GetDouble(s, "saturation", m.saturation);
    if (m.kind == ModelKind::kPathCount) {
      Require(!m.hop_weights.empty(), s + ".hop_weights must not be empty");
    } else {
      t.Validate();
    }
    e.models.push_back(std::move(m));
  }
  for (const std::string& name : config.SectionsWithPrefix("import")) {
    Require(e.FindModel(name) == nullptr,
            "'" + name + "' is both an in-repo model and an import");
    std::map<Split, fs::path> paths;
    for (Split s : kAllSplits) {
      if (const auto p = config.Get("import." + name, std::string(SplitName(s)))) {
        paths[s] = *p;
      }
    }
    e.imports.emplace_back(name, std::move(paths));
  }

  EnsembleSpec& ens = e.ensemble;
  ens.models = config.GetList("ensemble", "models");
  if (ens.models.empty()) {
    for (const auto& m : e.models) ens.models.push_back(m.name);
    for (const auto& [name, paths] : e.imports) ens.models.push_back(name);
  }
  for (const std::string& name : ens.models) {
    if (e.FindModel(name) == nullptr && !e.IsImported(name)) {
      Fail(Error::Kind::kInvalidArgument,
           "ensemble.models names '" + name + "', which has no [model." + name +
               "] or [import." + name + "] section");
    }
  }
  ens.anchor = config.GetString("ensemble", "anchor", ens.models.empty() ? "" : ens.models[0]);
  DynaSembleConfig& d = ens.dynamic;
  d.learning_rate = config.GetDouble("ensemble", "lr", d.learning_rate);
  d.negatives = static_cast<std::size_t>(
      config.GetInt("ensemble", "negatives", static_cast<std::int64_t>(d.negatives)));
  d.hidden = static_cast<std::size_t>(config.GetInt("ensemble", "hidden", 0));
  d.init_low = config.GetDouble("ensemble", "init_low", d.init_low);
  d.init_high = config.GetDouble("ensemble", "init_high", d.init_high);
  d.epochs = static_cast<int>(config.GetInt("ensemble", "epochs", d.epochs));
  d.margin = config.GetDouble("ensemble", "margin", d.margin);
  d.seed = static_cast<std::uint64_t>(
      config.GetInt("ensemble", "seed", static_cast<std::int64_t>(e.seed)));
  d.variant = ParseFeatureVariant(config.GetString("ensemble", "variant", "MeanVar"));
  d.sample_variance = config.GetBool("ensemble", "sample_variance", false);
  const std::string loss = config.GetString("ensemble", "loss", "margin");
  if (loss == "margin") {
    d.loss = EnsembleLoss::kMargin;
  } else if (loss == "cross_entropy") {
    d.loss = EnsembleLoss::kCrossEntropy;
  } else {
    Fail(Error::Kind::kInvalidArgument,
         "ensemble.loss must be margin or cross_entropy, got '" + loss + "'");
  }
  d.exclude_filtered_negatives = config.GetBool("ensemble", "exclude_filtered", true);
  d.Validate();
  ens.train_split = ParseSplit(config.GetString("ensemble", "train_split", "valid"));
  Require(ens.train_split != Split::kTest, "ensemble.train_split must not be test");

  e.heldout_fraction = config.GetDouble(
      "dataset", "heldout_fraction", ens.train_split == Split::kHeldOut ? 0.01 : 0.0);
  Require(e.heldout_fraction >= 0.0 && e.heldout_fraction < 1.0,
          "dataset.heldout_fraction must be in [0, 1)");
  if (ens.train_split == Split::kHeldOut) {
    Require(e.heldout_fraction > 0.0,
            "ensemble.train_split = heldout needs dataset.heldout_fraction > 0");
  }

  const std::string grid = config.GetString("static", "grid", "default");
  ens.static_grid = grid == "default" ? DefaultStaticGrid()
                                      : config.GetDoubleList("static", "grid");

  const std::string tie = config.GetString("eval", "tie", "optimistic");
  if (tie == "optimistic") {
    e.eval.tie = TieMode::kOptimistic;
  } else if (tie == "mean") {
    e.eval.tie = TieMode::kMean;
  } else {
    Fail(Error::Kind::kInvalidArgument,
         "eval.tie must be optimistic or mean, got '" + tie + "'");
  }
  e.eval.structural = config.GetString("eval", "structural", "");
  e.eval.textual = config.GetString("eval", "textual", "");
  for (const std::string* role : {&e.eval.structural, &e.eval.textual}) {
    if (!role->empty() &&
        std::find(ens.models.begin(), ens.models.end(), *role) == ens.models.end()) {
      Fail(Error::Kind::kInvalidArgument,
           "eval role model '" + *role + "' is not in ensemble.models");
    }
  }
  e.eval.rerank_top_k = static_cast<std::size_t>(config.GetInt("eval", "rerank_top_k", 100));

  // The anchor's weight is fixed at 1, so it is only reported when asked for.
  e.weight_model = config.GetString(
      "analysis", "weight_model", e.eval.structural != ens.anchor ? e.eval.structural : "");
  if (e.weight_model.empty()) {
    for (const std::string& m : ens.models) {
      if (m != ens.anchor) {
        e.weight_model = m;
        break;
      }
    }
  }
  e.probe_min_count =
      static_cast<std::size_t>(config.GetInt("analysis", "probe_min_count", 20));
  e.probe_draws = static_cast<int>(config.GetInt("analysis", "probe_draws", 1));
  e.probe_include_inverses = config.GetBool("analysis", "probe_include_inverses", true);
  e.significance_folds = static_cast<int>(config.GetInt("significance", "folds", 5));
  e.significance_seed = static_cast<std::uint64_t>(
      config.GetInt("significance", "seed", static_cast<std::int64_t>(e.seed)));
  return e;
}

const ModelSpec* Experiment::FindModel(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

bool Experiment::IsImported(const std::string& name) const {
  for (const auto& [n, paths] : imports) {
    if (n == name) return true;
  }
  return false;
}

std::size_t Experiment::ModelIndex(const std::string& name) const {
  const auto it = std::find(ensemble.models.begin(), ensemble.models.end(), name);
  if (it == ensemble.models.end()) {
    Fail(Error::Kind::kInvalidArgument, "'" + name + "' is not in ensemble.models");
  }
  return static_cast<std::size_t>(it - ensemble.models.begin());
}

std::size_t Experiment::AnchorIndex() const { return ModelIndex(ensemble.anchor); }

// --- Run ------------------------------------------------------------------------------

Run::Run(const Config& config, std::ostream& log)
    : exp_(Experiment::FromConfig(config)), log_(log) {
  dir_ = exp_.out / config.Hash();
  fs::create_directories(dir_);
  WriteProvenance();
}

void Run::WriteProvenance() const {
  WriteFile(dir_ / "config.ini", exp_.config.Canonical());
  WriteFile(dir_ / "VERSION", "kgcfuse " + ToolVersion() + "\n");
  std::string inputs;
  auto add = [&](const fs::path& p) {
    if (!fs::exists(p)) {
      Fail(Error::Kind::kIo, "configured input " + p.string() + " does not exist");
    }
    inputs += ToHex(Sha256File(p)) + "  " + p.string() + "\n";
  };
  if (!exp_.dataset_dir.empty()) {
    for (const char* f : {"train.txt", "valid.txt", "test.txt"}) add(exp_.dataset_dir / f);
  }
  for (const auto& [name, paths] : exp_.imports) {
    for (const auto& [split, p] : paths) add(p);
  }
  WriteFile(dir_ / "inputs.sha256", inputs);
}

fs::path Run::ModelPath(const std::string& name) const {
  return dir_ / "models" / (name + ".kgem");
}

fs::path Run::ScorePath(const std::string& name, Split split) const {
  return dir_ / "scores" / (name + "." + std::string(SplitName(split)) + ".kgcs");
}

const Bundle& Run::LoadedBundle() {
  if (!bundle_) bundle_ = LoadBundle(BundleDir());
  return *bundle_;
}

const FilterIndex& Run::Filter() {
  if (!filter_) filter_ = BuildFilterIndex(LoadedBundle().kg);
  return *filter_;
}

void Run::Prepare() {
  if (exp_.dataset_dir.empty()) {
    Fail(Error::Kind::kInvalidArgument,
         "no dataset directory; pass it to prepare or set dataset.dir");
  }
  Bundle b = BuildBundle(exp_.dataset_dir, exp_.dataset_id, exp_.load,
                         exp_.heldout_fraction, exp_.seed, exp_.reachability);
  SaveBundle(b, BundleDir());
  log_ << BundleSummary(b);
  log_ << "bundle written to " << BundleDir().string() << "\n";
  bundle_ = std::move(b);
  filter_.reset();
}

void Run::TrainBase(const std::optional<std::string>& only_model) {
  if (!exp_.config.Has("run", "seed")) {
    Fail(Error::Kind::kInvalidArgument, "train-base needs a seed (--seed or run.seed)");
  }
  const KnowledgeGraph& kg = LoadedBundle().kg;
  bool any = false;
  for (const ModelSpec& spec : exp_.models) {
    if (only_model && spec.name != *only_model) continue;
    any = true;
    fs::create_directories(ModelPath(spec.name).parent_path());
    ojson info;
    info["model"] = spec.name;
    info["kind"] = std::string(ModelKindName(spec.kind));
    if (spec.kind == ModelKind::kPathCount) {
      const PathCountModel m = MakePathCountModel(kg, spec.hop_weights, spec.saturation);
      SaveModel(m, ModelPath(spec.name));
      info["hop_weights"] = spec.hop_weights;
      info["saturation"] = spec.saturation;
    } else {
      TrainLog tlog;
      auto m = TrainEmbeddingModel(spec.kind, kg, spec.train, &tlog);
      SaveModel(*m, ModelPath(spec.name));
      const TrainConfig& t = spec.train;
      info["config"] = {{"dim", t.dim},
                        {"epochs", t.epochs},
                        {"batch_size", t.batch_size},
                        {"negatives", t.negatives_per_positive},
                        {"lr", t.learning_rate},
                        {"seed", t.seed},
                        {"adversarial_temperature", t.adversarial_temperature},
                        {"gamma", t.gamma},
                        {"regularization", t.regularization}};
      info["probe_loss_initial"] = tlog.probe_loss_initial;
      info["probe_loss_after_epoch"] = tlog.probe_loss_after_epoch;
      info["mean_epoch_loss"] = tlog.mean_epoch_loss;
      log_ << spec.name << ": probe loss " << tlog.probe_loss_initial << " -> "
           << (tlog.probe_loss_after_epoch.empty() ? tlog.probe_loss_initial
                                                   : tlog.probe_loss_after_epoch.back())
           << " after " << t.epochs << " epochs\n";
    }
    WriteFile(ModelPath(spec.name).string() + ".json", info.dump(2) + "\n");
    log_ << "saved " << ModelPath(spec.name).string() << "\n";
  }
  if (only_model && !any) {
    Fail(Error::Kind::kInvalidArgument, "no [model." + *only_model + "] section");
  }
}

void Run::ExportScores() {
  const Bundle& b = LoadedBundle();
  std::vector<Split> splits = {Split::kValid, Split::kTest};
  if (exp_.ensemble.train_split != Split::kValid) {
    splits.push_back(exp_.ensemble.train_split);
  }
  fs::create_directories(dir_ / "scores");
  for (const std::string& name : exp_.ensemble.models) {
    const ModelSpec* spec = exp_.FindModel(name);
    std::unique_ptr<Scorer> model;
    if (spec != nullptr) {
      RequireArtifact(ModelPath(name), "train-base");
      model = LoadModel(ModelPath(name), &b.kg);
    }
    for (Split split : splits) {
      const QueryManifest manifest = MakeManifest(b.kg, b.dataset_id, split);
      if (model) {
        kgcfuse::ExportScores(*model, b.kg, manifest, name, ScorePath(name, split), exp_.threads);
      } else {
        std::map<Split, fs::path> paths;
        for (const auto& [n, p] : exp_.imports) {
          if (n == name) paths = p;
        }
        const auto it = paths.find(split);
        if (it == paths.end()) {
          Fail(Error::Kind::kInvalidArgument,
               "import." + name + " has no " + std::string(SplitName(split)) +
                   " score matrix");
        }
        ScoreMatrix m = ImportScores(it->second, manifest);
        if (m.entity_count != b.kg.num_entities()) {
          Fail(Error::Kind::kChecksum, it->second.string() +
                                           ": entity count does not match the dataset");
        }
        m.model_name = name;
        WriteScoreMatrix(m, ScorePath(name, split));
      }
      log_ << "scores " << ScorePath(name, split).string() << " ("
           << manifest.queries.size() << " queries)\n";
    }
  }
}

std::vector<ScoreMatrix> Run::LoadMatrices(Split split) {
  const Bundle& b = LoadedBundle();
  const QueryManifest manifest = MakeManifest(b.kg, b.dataset_id, split);
  std::vector<ScoreMatrix> out;
  for (const std::string& name : exp_.ensemble.models) {
    RequireArtifact(ScorePath(name, split), "export-scores");
    out.push_back(ImportScores(ScorePath(name, split), manifest));
  }
  return out;
}

namespace {

std::vector<const ScoreMatrix*> Pointers(const std::vector<ScoreMatrix>& v) {
  std::vector<const ScoreMatrix*> out;
  for (const auto& m : v) out.push_back(&m);
  return out;
}

ojson DynamicConfigJson(const DynaSembleConfig& d, std::size_t k, Split split) {
  return {{"lr", d.learning_rate},
          {"negatives", d.negatives},
          {"hidden", d.hidden > 0 ? d.hidden : DefaultHiddenDim(k)},
          {"init", {d.init_low, d.init_high}},
          {"epochs", d.epochs},
          {"margin", d.margin},
          {"seed", d.seed},
          {"variant", std::string(FeatureVariantName(d.variant))},
          {"sample_variance", d.sample_variance},
          {"loss", d.loss == EnsembleLoss::kMargin ? "margin" : "cross_entropy"},
          {"exclude_filtered", d.exclude_filtered_negatives},
          {"train_split", std::string(SplitName(split))}};
}

}  // namespace

StaticEnsemble Run::LoadStatic() const {
  RequireArtifact(StaticPath(), "train-ensemble");
  const ojson j = ojson::parse(ReadFile(StaticPath()));
  StaticEnsemble s;
  s.anchor = j.at("anchor_index").get<std::size_t>();
  s.weights = j.at("weights").get<std::vector<double>>();
  s.validation_mrr = j.at("validation_mrr").get<double>();
  return s;
}

void Run::TrainEnsemble() {
  if (!exp_.config.Has("run", "seed")) {
    Fail(Error::Kind::kInvalidArgument,
         "train-ensemble needs a seed (--seed or run.seed)");
  }
  const Bundle& b = LoadedBundle();
  const std::size_t k = exp_.ensemble.models.size();
  const std::size_t anchor = exp_.AnchorIndex();

  // Static weight, always tuned on validation.
  {
    const auto valid = LoadMatrices(Split::kValid);
    const auto ptrs = Pointers(valid);
    const StaticEnsemble s =
        TuneStatic(ptrs, b.kg.split(Split::kValid), Filter(), anchor,
                   exp_.ensemble.static_grid, exp_.eval.tie);
    ojson j;
    j["models"] = exp_.ensemble.models;
    j["anchor_index"] = anchor;
    j["weights"] = s.weights;
    j["validation_mrr"] = s.validation_mrr;
    j["tie"] = std::string(TieName(exp_.eval.tie));
    j["grid_size"] = s.grid.size();
    WriteFile(StaticPath(), j.dump(2) + "\n");
    log_ << "static weights";
    for (double w : s.weights) log_ << " " << w;
    log_ << " (validation MRR " << s.validation_mrr << ")\n";
  }
  if (k < 2) {
    log_ << "single model: no dynamic ensemble to train\n";
    return;
  }
  DynaSembleConfig d = exp_.ensemble.dynamic;
  d.anchor = anchor;
  const auto train = LoadMatrices(exp_.ensemble.train_split);
  const auto ptrs = Pointers(train);
  DynaSembleLog dlog;
  const EnsembleModel model =
      TrainDynaSemble(ptrs, b.kg.split(exp_.ensemble.train_split), Filter(), d, &dlog);
  SaveEnsemble(model, EnsemblePath());
  ojson j;
  j["models"] = exp_.ensemble.models;
  j["anchor"] = exp_.ensemble.anchor;
  j["config"] = DynamicConfigJson(d, k, exp_.ensemble.train_split);
  j["steps"] = dlog.steps;
  j["skipped_queries"] = dlog.skipped_queries;
  j["mean_epoch_loss"] = dlog.mean_epoch_loss;
  WriteFile(dir_ / "ensemble.json", j.dump(2) + "\n");
  log_ << "ensemble config " << j["config"].dump() << "\n";
  log_ << "saved " << EnsemblePath().string() << " after " << dlog.steps << " steps\n";
}

namespace {

struct MethodRanks {
  std::string name;
  std::vector<double> ranks;
  const ScoreMatrix* matrix = nullptr;  // for constant-row counts
};

void WriteRanks(const fs::path& path, std::span<const double> ranks) {
  std::string text;
  for (double r : ranks) text += FormatDouble(r) + "\n";
  WriteFile(path, text);
}

}  // namespace

std::vector<double> ReadRanks(const fs::path& path) {
  std::vector<double> out;
  std::istringstream in(ReadFile(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x = 0.0;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), x);
    if (ec != std::errc()) Fail(Error::Kind::kParse, path.string() + ": bad rank");
    out.push_back(x);
  }
  return out;
}

void Run::Eval() {
  const Bundle& b = LoadedBundle();
  const auto& gold = b.kg.split(Split::kTest);
  const auto test = LoadMatrices(Split::kTest);
  const auto ptrs = Pointers(test);
  const std::size_t k = test.size();
  const TieMode tie = exp_.eval.tie;

  std::vector<MethodRanks> methods;
  std::vector<std::vector<double>> individual;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> w(k, 0.0);
    w[i] = 1.0;
    individual.push_back(WeightedRanks(ptrs, w, gold, Filter(), tie));
    methods.push_back({exp_.ensemble.models[i], individual.back(), &test[i]});
  }
  const StaticEnsemble s = LoadStatic();
  Require(s.weights.size() == k, "static.json does not match ensemble.models");
  methods.push_back({"static", WeightedRanks(ptrs, s.weights, gold, Filter(), tie)});
  std::vector<std::vector<double>> weights;
  if (k >= 2) {
    RequireArtifact(EnsemblePath(), "train-ensemble");
    const EnsembleModel model = LoadEnsemble(EnsemblePath());
    auto ev = EvaluateEnsemble(model, ptrs, gold, Filter(), tie);
    methods.push_back({"dynamic", std::move(ev.ranks)});
    weights = std::move(ev.weights);
  }
  if (!exp_.eval.structural.empty() && !exp_.eval.textual.empty()) {
    const std::size_t si = exp_.ModelIndex(exp_.eval.structural);
    const std::size_t ti = exp_.ModelIndex(exp_.eval.textual);
    methods.push_back({"rerank", RerankRanks(test[si], test[ti], gold, Filter(),
                                             exp_.eval.rerank_top_k)});
    const std::array<Split, 1> train_only = {Split::kTrain};
    const FilterIndex train_answers = BuildFilterIndex(b.kg, train_only);
    std::vector<Route> kgt5, select;
    for (std::size_t q = 0; q < gold.size(); ++q) {
      kgt5.push_back(Kgt5Route({gold[q].head, gold[q].relation}, train_answers));
      select.push_back(SplitSelect(q, b.reach.is_reachable));
    }
    methods.push_back({"kgt5-route", RoutedRanks(kgt5, individual[si], individual[ti])});
    methods.push_back(
        {"split-select", RoutedRanks(select, individual[si], individual[ti])});
  }
  methods.push_back({"best-oracle", BestOracleRanks(individual)});

  std::vector<SplitReport> reports;
  std::vector<std::pair<std::string, MetricsReport>> overall;
  ojson j;
  j["dataset"] = b.dataset_id;
  j["split"] = "test";
  j["tie"] = std::string(TieName(tie));
  j["methods"] = ojson::array();
  for (const MethodRanks& m : methods) {
    SplitReport r = EvaluateBySplit(m.name, m.ranks, b.reach.is_reachable);
    if (m.matrix != nullptr) CountDegenerateRows(*m.matrix, b.reach.is_reachable, r);
    overall.emplace_back(m.name, r.all);
    j["methods"].push_back(ojson::parse(SplitReportJson(r)));
    reports.push_back(std::move(r));
    WriteRanks(ReportDir() / "ranks" / (m.name + ".txt"), m.ranks);
  }
  if (!weights.empty()) {
    std::string text;
    for (const auto& w : weights) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        text += (i ? "\t" : "") + FormatDouble(w[i]);
      }
      text += "\n";
    }
    WriteFile(ReportDir() / "ranks" / "dynamic.weights.tsv", text);
  }
  std::string table = "test split, " + std::string(TieName(tie)) + " ties\n" +
                      RenderMetricsTable(overall) + "\n" + RenderSplitTable(reports);
  WriteFile(ReportDir() / "eval.txt", table);
  WriteFile(ReportDir() / "eval.json", j.dump(2) + "\n");
  log_ << table;
}

void Run::Analyze() {
  const Bundle& b = LoadedBundle();
  const auto& flags = b.reach.is_reachable;
  ojson j;
  std::string text;

  // Split-wise results of every method evaluated so far.
  RequireArtifact(ReportDir() / "eval.json", "eval");
  const ojson ev = ojson::parse(ReadFile(ReportDir() / "eval.json"));
  j["split_reports"] = ev.at("methods");
  text += "Results on the reachable and unreachable test splits\n";
  text += ReadFile(ReportDir() / "eval.txt") + "\n";

  // Weight statistics of the dynamic ensemble.
  const fs::path weights_path = ReportDir() / "ranks" / "dynamic.weights.tsv";
  if (fs::exists(weights_path) && !exp_.weight_model.empty()) {
    std::vector<std::vector<double>> weights;
    std::istringstream in(ReadFile(weights_path));
    std::string line;
    while (std::getline(in, line)) {
      std::vector<double> row;
      std::istringstream fields(line);
      double x;
      while (fields >> x) row.push_back(x);
      weights.push_back(std::move(row));
    }
    const std::size_t mi = exp_.ModelIndex(exp_.weight_model);
    const WeightStats ws = WeightStatsBySplit(weights, mi, flags);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "Ensemble weight of %s\n  reachable    mean %.4f  std %.4f  (n=%zu)\n"
                  "  unreachable  mean %.4f  std %.4f  (n=%zu)\n\n",
                  exp_.weight_model.c_str(), ws.reachable.mean, ws.reachable.std,
                  ws.reachable.n, ws.unreachable.mean, ws.unreachable.std,
                  ws.unreachable.n);
    text += buf;
    j["weight_stats"] = {{"model", exp_.weight_model},
                         {"reachable", {{"mean", ws.reachable.mean},
                                        {"std", ws.reachable.std},
                                        {"n", ws.reachable.n}}},
                         {"unreachable", {{"mean", ws.unreachable.mean},
                                          {"std", ws.unreachable.std},
                                          {"n", ws.unreachable.n}}}};
  }

  // Feature averages per model.
  const auto test = LoadMatrices(Split::kTest);
  text += "Average features across splits (mean, variance)\n";
  j["feature_stats"] = ojson::array();
  for (const ScoreMatrix& m : test) {
    const FeatureStats fs_ = FeatureStatsBySplit(m, flags);
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "  %-14s reachable (%.4f, %.4f) constant rows %zu/%zu   "
                  "unreachable (%.4f, %.4f) constant rows %zu/%zu\n",
                  m.model_name.c_str(), fs_.reachable.mean_of_means,
                  fs_.reachable.mean_of_variances, fs_.reachable.degenerate,
                  fs_.reachable.n, fs_.unreachable.mean_of_means,
                  fs_.unreachable.mean_of_variances, fs_.unreachable.degenerate,
                  fs_.unreachable.n);
    text += buf;
    auto side = [](const FeatureSideStats& s) {
      return ojson{{"mean", s.mean_of_means},
                   {"variance", s.mean_of_variances},
                   {"n", s.n},
                   {"constant_rows", s.degenerate}};
    };
    j["feature_stats"].push_back({{"model", m.model_name},
                                  {"reachable", side(fs_.reachable)},
                                  {"unreachable", side(fs_.unreachable)}});
  }
  text += "\n";

  // Composition probe of every RotatE model.
  j["composition_probe"] = ojson::array();
  for (const ModelSpec& spec : exp_.models) {
    if (spec.kind != ModelKind::kRotatE) continue;
    RequireArtifact(ModelPath(spec.name), "train-base");
    const auto scorer = LoadModel(ModelPath(spec.name), &b.kg);
    const auto& rotate = dynamic_cast<const RotatEModel&>(*scorer);
    CompositionProbeOptions opt;
    opt.min_count = exp_.probe_min_count;
    opt.seed = exp_.seed;
    opt.draws = exp_.probe_draws;
    opt.include_inverses = exp_.probe_include_inverses;
    char buf[256];
    try {
      const auto r = RotatECompositionProbe(rotate, b.kg, opt);
      std::snprintf(buf, sizeof(buf),
                    "Accuracy of closest relation (%s): %.1f%% over %zu patterns, "
                    "random baseline %.1f%%\n",
                    spec.name.c_str(), 100.0 * r.accuracy, r.num_patterns,
                    100.0 * r.random_baseline);
      j["composition_probe"].push_back({{"model", spec.name},
                                        {"accuracy", r.accuracy},
                                        {"random_baseline", r.random_baseline},
                                        {"patterns", r.num_patterns},
                                        {"trials", r.num_trials},
                                        {"mined_patterns", r.mined_patterns},
                                        {"mined_occurrences", r.mined_occurrences}});
    } catch (const Error& e) {
      if (e.kind() != Error::Kind::kDegenerate) throw;
      std::snprintf(buf, sizeof(buf), "Composition probe (%s): %s\n", spec.name.c_str(),
                    e.what());
      j["composition_probe"].push_back({{"model", spec.name}, {"error", e.what()}});
    }
    text += buf;
  }
  WriteFile(ReportDir() / "analysis.txt", text);
  WriteFile(ReportDir() / "analysis.json", j.dump(2) + "\n");
  log_ << text;
}

void Run::AblateFeatures() {
  const Bundle& b = LoadedBundle();
  const std::size_t k = exp_.ensemble.models.size();
  Require(k >= 2, "feature ablation needs at least two models");
  const auto train = LoadMatrices(exp_.ensemble.train_split);
  const auto test = LoadMatrices(Split::kTest);
  const auto train_ptrs = Pointers(train);
  const auto test_ptrs = Pointers(test);
  std::vector<std::pair<std::string, MetricsReport>> rows;
  ojson j = ojson::array();
  for (FeatureVariant v : AllFeatureVariants()) {
    DynaSembleConfig d = exp_.ensemble.dynamic;
    d.anchor = exp_.AnchorIndex();
    d.variant = v;
    const std::string name(FeatureVariantName(v));
    if (v == FeatureVariant::kTop10 && b.kg.num_entities() < 10) {
      log_ << name << ": skipped (fewer than 10 entities)\n";
      j.push_back({{"variant", name}, {"skipped", "fewer than 10 entities"}});
      continue;
    }
    const EnsembleModel model = TrainDynaSemble(
        train_ptrs, b.kg.split(exp_.ensemble.train_split), Filter(), d);
    const auto ev =
        EvaluateEnsemble(model, test_ptrs, b.kg.split(Split::kTest), Filter(),
                         exp_.eval.tie);
    const MetricsReport r = AggregateRanks(ev.ranks);
    rows.emplace_back(name, r);
    ojson entry = MetricsJson(r);
    entry["variant"] = name;
    j.push_back(entry);
  }
  const std::string table = "Feature ablation (test split)\n" + RenderMetricsTable(rows);
  WriteFile(ReportDir() / "ablation.txt", table);
  WriteFile(ReportDir() / "ablation.json", j.dump(2) + "\n");
  log_ << table;
}

void Run::Significance() {
  const fs::path dyn = ReportDir() / "ranks" / "dynamic.txt";
  const fs::path sta = ReportDir() / "ranks" / "static.txt";
  RequireArtifact(dyn, "eval");
  RequireArtifact(sta, "eval");
  const auto a = ReadRanks(dyn);
  const auto s = ReadRanks(sta);
  const SignificanceResult r =
      SignificanceRun(a, s, exp_.significance_folds, exp_.significance_seed);
  std::string text = "fold   dynamic MRR   static MRR\n";
  for (std::size_t f = 0; f < r.mrr_a.size(); ++f) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%4zu   %11.4f   %10.4f\n", f + 1,
                  100.0 * r.mrr_a[f], 100.0 * r.mrr_b[f]);
    text += buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "t-value %.3f\n", r.t);
  text += buf;
  ojson j = {{"folds", exp_.significance_folds},
             {"seed", exp_.significance_seed},
             {"dynamic_mrr", r.mrr_a},
             {"static_mrr", r.mrr_b},
             {"t", r.t}};
  WriteFile(ReportDir() / "significance.txt", text);
  WriteFile(ReportDir() / "significance.json", j.dump(2) + "\n");
  log_ << text;
}

}  // namespace kgcfuse
