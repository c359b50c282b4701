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

#include "kgcfuse/dynasemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "kgcfuse/binary_io.hpp"

namespace kgcfuse {

namespace {

constexpr std::array<FeatureVariant, 6> kVariants = {
    FeatureVariant::kMeanVar, FeatureVariant::kMeanStd, FeatureVariant::kStd,
    FeatureVariant::kMean,    FeatureVariant::kZip,     FeatureVariant::kTop10};

constexpr std::uint8_t kSampleVarianceBit = 0x80;

}  // namespace

std::string_view FeatureVariantName(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::kMeanVar: return "MeanVar";
    case FeatureVariant::kMeanStd: return "MeanStd";
    case FeatureVariant::kStd: return "Std";
    case FeatureVariant::kMean: return "Mean";
    case FeatureVariant::kZip: return "Zip";
    case FeatureVariant::kTop10: return "Top10";
  }
  Fail(Error::Kind::kInvalidArgument, "unknown feature variant");
}

FeatureVariant ParseFeatureVariant(std::string_view name) {
  for (FeatureVariant v : kVariants) {
    if (FeatureVariantName(v) == name) return v;
  }
  Fail(Error::Kind::kInvalidArgument,
       "unknown feature variant '" + std::string(name) +
           "' (expected MeanVar, MeanStd, Std, Mean, Zip or Top10)");
}

std::span<const FeatureVariant> AllFeatureVariants() { return kVariants; }

std::pair<double, double> ExtractFeatures(std::span<const double> row,
                                          bool sample_variance) {
  if (row.empty()) Fail(Error::Kind::kInvalidArgument, "empty score row");
  double sum = 0.0;
  for (double x : row) sum += x;
  const double mean = sum / static_cast<double>(row.size());
  double sq = 0.0;
  for (double x : row) sq += (x - mean) * (x - mean);
  double denom = static_cast<double>(row.size());
  if (sample_variance) {
    if (row.size() < 2) {
      Fail(Error::Kind::kInvalidArgument, "sample variance needs two entries");
    }
    denom -= 1.0;
  }
  return {mean, sq / denom};
}

std::vector<double> FeatureVariants(std::span<const double> row,
                                    FeatureVariant variant,
                                    bool sample_variance) {
  switch (variant) {
    case FeatureVariant::kZip:
      if (row.empty()) Fail(Error::Kind::kInvalidArgument, "empty score row");
      return {row.begin(), row.end()};
    case FeatureVariant::kTop10: {
      if (row.size() < 10) {
        Fail(Error::Kind::kInvalidArgument,
             "Top10 features need at least 10 entities, got " +
                 std::to_string(row.size()));
      }
      std::vector<double> top(row.begin(), row.end());
      std::partial_sort(top.begin(), top.begin() + 10, top.end(),
                        std::greater<>());
      top.resize(10);
      return top;
    }
    default:
      break;
  }
  const auto [mean, var] = ExtractFeatures(row, sample_variance);
  switch (variant) {
    case FeatureVariant::kMeanVar: return {mean, var};
    case FeatureVariant::kMeanStd: return {mean, std::sqrt(var)};
    case FeatureVariant::kStd: return {std::sqrt(var)};
    case FeatureVariant::kMean: return {mean};
    default: break;
  }
  Fail(Error::Kind::kInvalidArgument, "unknown feature variant");
}

std::size_t FeatureLength(FeatureVariant variant, std::size_t num_entities) {
  switch (variant) {
    case FeatureVariant::kMeanVar:
    case FeatureVariant::kMeanStd: return 2;
    case FeatureVariant::kStd:
    case FeatureVariant::kMean: return 1;
    case FeatureVariant::kZip: return num_entities;
    case FeatureVariant::kTop10: return 10;
  }
  Fail(Error::Kind::kInvalidArgument, "unknown feature variant");
}

std::size_t DefaultHiddenDim(std::size_t num_models) {
  Require(num_models >= 2 && num_models < 16, "ensemble needs 2..15 models");
  return std::size_t{1} << (num_models + 2);
}

// --- MLPHead ----------------------------------------------------------------

MLPHead::MLPHead(std::size_t in_dim, std::size_t hidden)
    : in_dim_(in_dim), hidden_(hidden), params_(hidden * in_dim + 2 * hidden + 1, 0.0) {
  Require(in_dim > 0 && hidden > 0, "MLP dimensions must be positive");
}

MLPHead MLPHead::Initialize(std::size_t in_dim, std::size_t hidden, Rng& rng,
                            double lo, double hi) {
  MLPHead head(in_dim, hidden);
  double* p = head.params_.data();
  for (std::size_t i = 0; i < hidden * in_dim; ++i) p[i] = rng.Uniform(lo, hi);
  double* w2 = p + hidden * in_dim + hidden;
  for (std::size_t j = 0; j < hidden; ++j) w2[j] = rng.Uniform(lo, hi);
  return head;
}

double MLPHead::Forward(std::span<const double> x) const {
  if (x.size() != in_dim_) {
    Fail(Error::Kind::kInvalidArgument,
         "feature length " + std::to_string(x.size()) + " does not match head input " +
             std::to_string(in_dim_));
  }
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * in_dim_;
  const double* w2 = b1 + hidden_;
  double out = w2[hidden_];
  for (std::size_t j = 0; j < hidden_; ++j) {
    double z = b1[j];
    const double* row = w1 + j * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) z += row[i] * x[i];
    if (z > 0.0) out += w2[j] * z;
  }
  return out;
}

void MLPHead::Backward(std::span<const double> x, double upstream,
                       std::span<double> grad) const {
  Require(x.size() == in_dim_ && grad.size() == params_.size(),
          "MLP backward dimension mismatch");
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * in_dim_;
  const double* w2 = b1 + hidden_;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + hidden_ * in_dim_;
  double* g_w2 = g_b1 + hidden_;
  g_w2[hidden_] += upstream;
  for (std::size_t j = 0; j < hidden_; ++j) {
    double z = b1[j];
    const double* row = w1 + j * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) z += row[i] * x[i];
    if (!(z > 0.0)) continue;
    g_w2[j] += upstream * z;
    const double gz = upstream * w2[j];
    g_b1[j] += gz;
    double* g_row = g_w1 + j * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) g_row[i] += gz * x[i];
  }
}

double ComputeWeight(const MLPHead& head, std::span<const double> features) {
  return head.Forward(features);
}

// --- EnsembleModel ---------------------------------------------------------

void EnsembleModel::Validate() const {
  Require(num_models >= 2, "ensemble needs at least two models");
  Require(anchor < num_models, "anchor index out of range");
  Require(heads.size() == num_models - 1, "ensemble needs k - 1 heads");
  Require(margin >= 0.0 && std::isfinite(margin), "margin must be finite and >= 0");
  for (const MLPHead& h : heads) {
    Require(h.in_dim() == heads[0].in_dim(), "heads disagree on input length");
    for (double p : h.params()) {
      if (!std::isfinite(p)) Fail(Error::Kind::kNumerical, "non-finite head parameter");
    }
  }
}

std::vector<double> EnsembleModel::Features(
    std::span<const std::vector<double>> rows) const {
  if (rows.size() != num_models) {
    Fail(Error::Kind::kInvalidArgument, "expected " + std::to_string(num_models) +
                                            " score rows, got " +
                                            std::to_string(rows.size()));
  }
  std::vector<double> out;
  for (const auto& row : rows) {
    const auto f = FeatureVariants(row, variant, sample_variance);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

std::vector<double> EnsembleModel::Weights(std::span<const double> features) const {
  std::vector<double> w(num_models, 1.0);
  for (std::size_t i = 0; i < num_models; ++i) {
    if (i != anchor) w[i] = heads[HeadIndex(i)].Forward(features);
  }
  return w;
}

std::vector<double> EnsembleScore(std::span<const std::vector<double>> rows,
                                  std::span<const double> weights) {
  Require(!rows.empty(), "no score rows");
  Require(rows.size() == weights.size(), "one weight per score row required");
  const std::size_t n = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != n) Fail(Error::Kind::kInvalidArgument, "score row length mismatch");
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double w = weights[i];
    const double* r = rows[i].data();
    for (std::size_t e = 0; e < n; ++e) out[e] += w * r[e];
  }
  return out;
}

// --- Negatives and losses --------------------------------------------------

std::vector<EntityId> SampleNegatives(std::size_t num_entities, EntityId gold,
                                      std::span<const EntityId> filter,
                                      std::size_t n, Rng& rng) {
  std::vector<EntityId> pool;
  pool.reserve(num_entities);
  std::size_t f = 0;
  for (EntityId e = 0; e < num_entities; ++e) {
    while (f < filter.size() && filter[f] < e) ++f;
    if (e == gold || (f < filter.size() && filter[f] == e)) continue;
    pool.push_back(e);
  }
  if (pool.empty()) {
    Fail(Error::Kind::kDegenerate, "no negative candidates left after filtering");
  }
  if (pool.size() <= n) return pool;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.Below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

std::vector<EntityId> SampleNegatives(std::size_t num_entities, EntityId gold,
                                      std::span<const EntityId> filter,
                                      std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return SampleNegatives(num_entities, gold, filter, n, rng);
}

double MarginLoss(std::span<const double> scores, EntityId gold,
                  std::span<const EntityId> negatives, double margin) {
  const double g = scores[gold];
  double loss = 0.0;
  for (EntityId t : negatives) loss += std::max(scores[t] - g + margin, 0.0);
  return loss;
}

double CrossEntropyLoss(std::span<const double> scores, EntityId gold,
                        std::span<const EntityId> negatives) {
  double hi = scores[gold];
  for (EntityId t : negatives) hi = std::max(hi, scores[t]);
  double total = std::exp(scores[gold] - hi);
  for (EntityId t : negatives) total += std::exp(scores[t] - hi);
  return hi + std::log(total) - scores[gold];
}

double QueryLossAndGrad(const EnsembleModel& model,
                        std::span<const std::vector<double>> rows,
                        EntityId gold, std::span<const EntityId> negatives,
                        EnsembleLoss loss,
                        std::vector<std::vector<double>>* grads) {
  const std::vector<double> features = model.Features(rows);
  const std::vector<double> weights = model.Weights(features);
  const std::vector<double> scores = EnsembleScore(rows, weights);
  const std::size_t k = model.num_models;

  double value = 0.0;
  std::vector<double> g_w(k, 0.0);
  if (loss == EnsembleLoss::kMargin) {
    value = MarginLoss(scores, gold, negatives, model.margin);
    const double sg = scores[gold];
    for (EntityId t : negatives) {
      if (!(scores[t] - sg + model.margin > 0.0)) continue;
      for (std::size_t i = 0; i < k; ++i) g_w[i] += rows[i][t] - rows[i][gold];
    }
  } else {
    value = CrossEntropyLoss(scores, gold, negatives);
    double hi = scores[gold];
    for (EntityId t : negatives) hi = std::max(hi, scores[t]);
    double total = std::exp(scores[gold] - hi);
    for (EntityId t : negatives) total += std::exp(scores[t] - hi);
    const double p_gold = std::exp(scores[gold] - hi) / total;
    for (std::size_t i = 0; i < k; ++i) g_w[i] += (p_gold - 1.0) * rows[i][gold];
    for (EntityId t : negatives) {
      const double p = std::exp(scores[t] - hi) / total;
      for (std::size_t i = 0; i < k; ++i) g_w[i] += p * rows[i][t];
    }
  }

  if (grads != nullptr) {
    grads->resize(model.heads.size());
    for (std::size_t i = 0; i < k; ++i) {
      if (i == model.anchor) continue;
      const std::size_t h = model.HeadIndex(i);
      auto& g = (*grads)[h];
      g.resize(model.heads[h].num_params(), 0.0);
      model.heads[h].Backward(features, g_w[i], g);
    }
  }
  return value;
}

// --- Training ----------------------------------------------------------------

void DynaSembleConfig::Validate() const {
  Require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "learning rate must be positive");
  Require(negatives > 0, "need at least one negative per query");
  Require(epochs >= 0, "epochs must be >= 0");
  Require(margin >= 0.0 && std::isfinite(margin), "margin must be finite and >= 0");
  Require(init_high >= init_low, "empty init range");
}

void CheckAligned(std::span<const ScoreMatrix* const> matrices,
                  std::span<const Triple> gold) {
  Require(!matrices.empty(), "no score matrices");
  const ScoreMatrix& first = *matrices[0];
  for (const ScoreMatrix* m : matrices) {
    if (m->manifest_digest != first.manifest_digest) {
      Fail(Error::Kind::kChecksum, "score matrices '" + first.model_name + "' and '" +
                                       m->model_name +
                                       "' were exported for different manifests");
    }
    if (m->entity_count != first.entity_count || m->num_queries() != first.num_queries()) {
      Fail(Error::Kind::kChecksum, "score matrix shapes differ");
    }
  }
  if (first.num_queries() != gold.size()) {
    Fail(Error::Kind::kChecksum, "score matrices have " +
                                     std::to_string(first.num_queries()) +
                                     " rows but the split has " +
                                     std::to_string(gold.size()) + " queries");
  }
  for (std::size_t q = 0; q < gold.size(); ++q) {
    const Query& query = first.queries[q];
    if (query.head != gold[q].head || query.relation != gold[q].relation ||
        gold[q].tail >= first.entity_count) {
      Fail(Error::Kind::kChecksum,
           "score matrix row " + std::to_string(q) + " does not match the split");
    }
  }
}

std::vector<std::vector<double>> NormalizedRows(
    std::span<const ScoreMatrix* const> matrices, std::size_t q) {
  std::vector<std::vector<double>> rows;
  rows.reserve(matrices.size());
  for (const ScoreMatrix* m : matrices) rows.push_back(MaxMinNormalize(m->Row(q)));
  return rows;
}

EnsembleModel InitializeEnsemble(std::size_t num_models,
                                 std::size_t num_entities,
                                 const DynaSembleConfig& config) {
  config.Validate();
  Require(config.anchor < num_models, "anchor index out of range");
  EnsembleModel model;
  model.num_models = num_models;
  model.anchor = config.anchor;
  model.variant = config.variant;
  model.sample_variance = config.sample_variance;
  model.margin = config.margin;
  const std::size_t in_dim = num_models * FeatureLength(config.variant, num_entities);
  const std::size_t hidden =
      config.hidden > 0 ? config.hidden : DefaultHiddenDim(num_models);
  Rng rng(DeriveSeed(config.seed, 0));
  for (std::size_t i = 0; i + 1 < num_models; ++i) {
    model.heads.push_back(
        MLPHead::Initialize(in_dim, hidden, rng, config.init_low, config.init_high));
  }
  return model;
}

EnsembleModel TrainDynaSemble(std::span<const ScoreMatrix* const> matrices,
                              std::span<const Triple> gold,
                              const FilterIndex& filter,
                              const DynaSembleConfig& config,
                              DynaSembleLog* log) {
  CheckAligned(matrices, gold);
  const std::size_t num_entities = matrices[0]->entity_count;
  EnsembleModel model = InitializeEnsemble(matrices.size(), num_entities, config);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<std::vector<double>> m1, m2, grads;
  for (const MLPHead& h : model.heads) {
    m1.emplace_back(h.num_params(), 0.0);
    m2.emplace_back(h.num_params(), 0.0);
  }
  Rng order_rng(DeriveSeed(config.seed, 1));
  Rng negative_rng(DeriveSeed(config.seed, 2));
  std::vector<std::size_t> order(gold.size());
  std::size_t step = 0;
  std::size_t skipped = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.Shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t q : order) {
      const Triple& t = gold[q];
      const std::span<const EntityId> known =
          config.exclude_filtered_negatives ? filter.Tails(t.head, t.relation)
                                            : std::span<const EntityId>();
      // Every other entity is a known answer: nothing to rank against.
      const bool gold_known = std::binary_search(known.begin(), known.end(), t.tail);
      if (known.size() + (gold_known ? 0 : 1) >= num_entities) {
        ++skipped;
        continue;
      }
      const std::vector<EntityId> negatives =
          SampleNegatives(num_entities, t.tail, known, config.negatives, negative_rng);
      const auto rows = NormalizedRows(matrices, q);
      grads.assign(model.heads.size(), {});
      const double loss =
          QueryLossAndGrad(model, rows, t.tail, negatives, config.loss, &grads);
      if (!std::isfinite(loss)) {
        Fail(Error::Kind::kNumerical, "non-finite ensemble loss at step " +
                                          std::to_string(step) + " (query " +
                                          std::to_string(q) + ")");
      }
      epoch_loss += loss;
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t h = 0; h < model.heads.size(); ++h) {
        auto params = model.heads[h].params();
        for (std::size_t p = 0; p < params.size(); ++p) {
          const double g = grads[h][p];
          m1[h][p] = kBeta1 * m1[h][p] + (1.0 - kBeta1) * g;
          m2[h][p] = kBeta2 * m2[h][p] + (1.0 - kBeta2) * g * g;
          params[p] -= config.learning_rate * (m1[h][p] / c1) /
                       (std::sqrt(m2[h][p] / c2) + kEps);
        }
      }
    }
    if (log != nullptr) {
      log->mean_epoch_loss.push_back(
          gold.empty() ? 0.0 : epoch_loss / static_cast<double>(gold.size()));
    }
  }
  if (log != nullptr) {
    log->steps = step;
    log->skipped_queries = skipped;
  }
  return model;
}

EnsembleEvaluation EvaluateEnsemble(const EnsembleModel& model,
                                    std::span<const ScoreMatrix* const> matrices,
                                    std::span<const Triple> gold,
                                    const FilterIndex& filter, TieMode tie) {
  model.Validate();
  CheckAligned(matrices, gold);
  Require(matrices.size() == model.num_models, "model count mismatch");
  EnsembleEvaluation out;
  out.ranks.reserve(gold.size());
  out.weights.reserve(gold.size());
  for (std::size_t q = 0; q < gold.size(); ++q) {
    const Triple& t = gold[q];
    const auto rows = NormalizedRows(matrices, q);
    const auto weights = model.Weights(model.Features(rows));
    const auto scores = EnsembleScore(rows, weights);
    out.ranks.push_back(FilteredRank<double>(scores, t.tail,
                                             filter.Tails(t.head, t.relation), tie));
    out.weights.push_back(weights);
  }
  return out;
}

// --- Checkpoint ----------------------------------------------------------------

void SaveEnsemble(const EnsembleModel& model, const std::filesystem::path& path) {
  model.Validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(Error::Kind::kIo, "cannot write " + path.string());
  out.write("KGDE", 4);
  binary::Write<std::uint32_t>(out, kEnsembleCheckpointVersion);
  binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_models));
  binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(model.anchor));
  std::uint8_t tag = static_cast<std::uint8_t>(model.variant);
  if (model.sample_variance) tag |= kSampleVarianceBit;
  binary::Write<std::uint8_t>(out, tag);
  binary::Write<double>(out, model.margin);
  for (const MLPHead& h : model.heads) {
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(h.in_dim()));
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(h.hidden()));
    binary::WriteSpan<double>(out, h.params());
  }
  if (!out) Fail(Error::Kind::kIo, "write failed for " + path.string());
}

EnsembleModel LoadEnsemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(Error::Kind::kIo, "cannot open " + path.string());
  binary::ExpectMagic(in, "KGDE", "ensemble checkpoint");
  const auto version = binary::Read<std::uint32_t>(in, "version");
  if (version != kEnsembleCheckpointVersion) {
    Fail(Error::Kind::kFormat,
         "unsupported ensemble checkpoint version " + std::to_string(version));
  }
  EnsembleModel model;
  model.num_models = binary::Read<std::uint32_t>(in, "model count");
  model.anchor = binary::Read<std::uint32_t>(in, "anchor index");
  const auto tag = binary::Read<std::uint8_t>(in, "feature variant");
  model.sample_variance = (tag & kSampleVarianceBit) != 0;
  const std::uint8_t variant = tag & static_cast<std::uint8_t>(~kSampleVarianceBit);
  if (variant >= kVariants.size()) {
    Fail(Error::Kind::kFormat, "unknown feature variant tag " + std::to_string(variant));
  }
  model.variant = static_cast<FeatureVariant>(variant);
  model.margin = binary::Read<double>(in, "margin");
  if (model.num_models < 2 || model.num_models > 64) {
    Fail(Error::Kind::kFormat, "implausible model count " + std::to_string(model.num_models));
  }
  for (std::size_t i = 0; i + 1 < model.num_models; ++i) {
    const auto in_dim = binary::Read<std::uint32_t>(in, "head input size");
    const auto hidden = binary::Read<std::uint32_t>(in, "head hidden size");
    if (in_dim == 0 || hidden == 0) Fail(Error::Kind::kFormat, "empty MLP head");
    MLPHead head(in_dim, hidden);
    if (!binary::ReadSpan<double>(in, head.params())) {
      Fail(Error::Kind::kFormat, "truncated parameters of head " + std::to_string(i));
    }
    model.heads.push_back(std::move(head));
  }
  model.Validate();
  return model;
}

}  // namespace kgcfuse
