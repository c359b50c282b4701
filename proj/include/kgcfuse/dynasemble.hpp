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

// Query-dependent ensembling. Every non-anchor model i gets a weight
// w_i(q) = MLP_i(f(M_1, q) || ... || f(M_k, q)) computed from summary
// statistics of the normalized score rows, and the ensemble scores
// E(q, t) = sum_i w_i(q) M_i(q, t) with the anchor's weight fixed at 1.

#ifndef KGCFUSE_DYNASEMBLE_HPP_
#define KGCFUSE_DYNASEMBLE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgcfuse/kg.hpp"
#include "kgcfuse/metrics.hpp"
#include "kgcfuse/random.hpp"
#include "kgcfuse/score_store.hpp"

namespace kgcfuse {

enum class FeatureVariant : std::uint8_t {
  kMeanVar = 0,
  kMeanStd = 1,
  kStd = 2,
  kMean = 3,
  kZip = 4,
  kTop10 = 5,
};

std::string_view FeatureVariantName(FeatureVariant v);
FeatureVariant ParseFeatureVariant(std::string_view name);
// In ablation order.
std::span<const FeatureVariant> AllFeatureVariants();

// Population mean and variance (or sample variance) of a normalized row.
std::pair<double, double> ExtractFeatures(std::span<const double> row,
                                          bool sample_variance = false);

std::vector<double> FeatureVariants(std::span<const double> row,
                                    FeatureVariant variant,
                                    bool sample_variance = false);

std::size_t FeatureLength(FeatureVariant variant, std::size_t num_entities);

// 16 hidden units for two models, 32 for three, doubling per model.
std::size_t DefaultHiddenDim(std::size_t num_models);

// Two-layer perceptron with a rectifier hidden layer and a scalar linear
// output. Parameters are stored flat: W1 (hidden x in_dim, row-major), b1,
// w2 (hidden), b2.
class MLPHead {
 public:
  MLPHead() = default;
  MLPHead(std::size_t in_dim, std::size_t hidden);

  // Weights uniform in [lo, hi), biases zero.
  static MLPHead Initialize(std::size_t in_dim, std::size_t hidden, Rng& rng,
                            double lo = 0.0, double hi = 2.0);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double Forward(std::span<const double> x) const;
  // Adds upstream * dw/dparams into `grad` (size num_params()).
  void Backward(std::span<const double> x, double upstream,
                std::span<double> grad) const;

 private:
  std::size_t in_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

double ComputeWeight(const MLPHead& head, std::span<const double> features);

struct EnsembleModel {
  std::size_t num_models = 0;
  std::size_t anchor = 0;
  FeatureVariant variant = FeatureVariant::kMeanVar;
  bool sample_variance = false;
  double margin = 0.1;
  // One per non-anchor model, in model order.
  std::vector<MLPHead> heads;

  // Head serving model i (i != anchor).
  std::size_t HeadIndex(std::size_t model) const {
    return model < anchor ? model : model - 1;
  }
  void Validate() const;

  std::vector<double> Features(std::span<const std::vector<double>> rows) const;
  // Size num_models; the anchor's entry is exactly 1.
  std::vector<double> Weights(std::span<const double> features) const;
};

// E[e] = sum_i weights[i] * rows[i][e].
std::vector<double> EnsembleScore(std::span<const std::vector<double>> rows,
                                  std::span<const double> weights);

// Uniform sample without replacement from the entities other than `gold` and
// those in `filter` (sorted). Returns the whole pool, ascending, if it has at
// most n members.
std::vector<EntityId> SampleNegatives(std::size_t num_entities, EntityId gold,
                                      std::span<const EntityId> filter,
                                      std::size_t n, Rng& rng);
std::vector<EntityId> SampleNegatives(std::size_t num_entities, EntityId gold,
                                      std::span<const EntityId> filter,
                                      std::size_t n, std::uint64_t seed);

// sum_{t in negatives} max(E[t] - E[gold] + m, 0).
double MarginLoss(std::span<const double> scores, EntityId gold,
                  std::span<const EntityId> negatives, double margin);

// -log softmax over {gold} + negatives, evaluated at gold.
double CrossEntropyLoss(std::span<const double> scores, EntityId gold,
                        std::span<const EntityId> negatives);

enum class EnsembleLoss : std::uint8_t { kMargin = 0, kCrossEntropy = 1 };

// Loss of one query plus its gradient with respect to every head's
// parameters (grads[h] sized like heads[h]; accumulated, not overwritten).
double QueryLossAndGrad(const EnsembleModel& model,
                        std::span<const std::vector<double>> rows,
                        EntityId gold, std::span<const EntityId> negatives,
                        EnsembleLoss loss,
                        std::vector<std::vector<double>>* grads);

struct DynaSembleConfig {
  double learning_rate = 5e-5;
  std::size_t negatives = 10000;
  // 0 selects DefaultHiddenDim(k).
  std::size_t hidden = 0;
  double init_low = 0.0;
  double init_high = 2.0;
  int epochs = 1;
  double margin = 0.1;
  std::uint64_t seed = 0;
  std::size_t anchor = 0;
  FeatureVariant variant = FeatureVariant::kMeanVar;
  bool sample_variance = false;
  EnsembleLoss loss = EnsembleLoss::kMargin;
  // When false, negatives are drawn from every entity except the gold one.
  bool exclude_filtered_negatives = true;

  void Validate() const;
};

struct DynaSembleLog {
  std::vector<double> mean_epoch_loss;
  std::size_t steps = 0;
  // Query visits without a negative candidate (all entities filtered).
  std::size_t skipped_queries = 0;
};

// Matrices must share one manifest; row q scores the query of gold[q].
void CheckAligned(std::span<const ScoreMatrix* const> matrices,
                  std::span<const Triple> gold);

// Normalized score rows of query q across all matrices.
std::vector<std::vector<double>> NormalizedRows(
    std::span<const ScoreMatrix* const> matrices, std::size_t q);

// Trains the heads with Adam, one query per step, in a seeded shuffled order
// per epoch. Base scores stay constant.
EnsembleModel TrainDynaSemble(std::span<const ScoreMatrix* const> matrices,
                              std::span<const Triple> gold,
                              const FilterIndex& filter,
                              const DynaSembleConfig& config,
                              DynaSembleLog* log = nullptr);

// Freshly initialized model, as TrainDynaSemble would start from.
EnsembleModel InitializeEnsemble(std::size_t num_models,
                                 std::size_t num_entities,
                                 const DynaSembleConfig& config);

struct EnsembleEvaluation {
  std::vector<double> ranks;
  // weights[q][i]: weight of model i on query q.
  std::vector<std::vector<double>> weights;
};

EnsembleEvaluation EvaluateEnsemble(const EnsembleModel& model,
                                    std::span<const ScoreMatrix* const> matrices,
                                    std::span<const Triple> gold,
                                    const FilterIndex& filter,
                                    TieMode tie = TieMode::kOptimistic);

// --- Checkpoint -----------------------------------------------------------
// "KGDE", u32 version, u32 k, u32 anchor, u8 variant tag (bit 7 set when
// sample variance is used), f64 margin, then per head u32 in_dim,
// u32 hidden and its f64 parameters.

inline constexpr std::uint32_t kEnsembleCheckpointVersion = 1;

void SaveEnsemble(const EnsembleModel& model, const std::filesystem::path& path);
EnsembleModel LoadEnsemble(const std::filesystem::path& path);

}  // namespace kgcfuse

#endif  // KGCFUSE_DYNASEMBLE_HPP_
