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

// Desk-scale base scorers: RotatE, ComplEx and a path-count structural model.
// All of them expose "higher is better" scores.

#ifndef KGCFUSE_MODELS_HPP_
#define KGCFUSE_MODELS_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kgcfuse/common.hpp"
#include "kgcfuse/kg.hpp"

namespace kgcfuse {

enum class ModelKind : std::uint8_t { kRotatE = 1, kComplEx = 2, kPathCount = 3 };

std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

// Frozen scorer over all entities.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ModelKind kind() const = 0;
  virtual std::size_t num_entities() const = 0;
  virtual double Score(EntityId head, RelationId relation,
                       EntityId tail) const = 0;
  // out[e] = Score(head, relation, e) for every entity e.
  virtual void ScoreAll(Query query, std::span<float> out) const = 0;

  std::vector<float> ScoreAll(Query query) const {
    std::vector<float> out(num_entities());
    ScoreAll(query, out);
    return out;
  }
};

struct TrainConfig {
  int dim = 256;
  int epochs = 50;
  int batch_size = 512;
  int negatives_per_positive = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double adversarial_temperature = 1.0;
  // RotatE margin: 12 for WN18RR, 9 for FB15k-237.
  double gamma = 12.0;
  // L2 penalty on the embeddings of each positive triple (ComplEx only).
  double regularization = 1e-6;

  void Validate() const;
};

// Entity embeddings are complex vectors stored as [re(0..d) | im(0..d)];
// relations are phase vectors so every relation factor has unit modulus.
struct RotatEModel final : Scorer {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t dim = 0;
  float gamma = 12.0f;
  std::uint64_t seed = 0;
  std::vector<float> entity_embeddings;  // entities x 2*dim
  std::vector<float> relation_phases;    // relations x dim

  ModelKind kind() const override { return ModelKind::kRotatE; }
  std::size_t num_entities() const override { return entities; }
  double Score(EntityId h, RelationId r, EntityId t) const override;
  void ScoreAll(Query q, std::span<float> out) const override;
  using Scorer::ScoreAll;

  static RotatEModel Initialize(std::size_t entities, std::size_t relations,
                                const TrainConfig& config);
};

// Entity and relation embeddings are complex vectors [re | im].
struct ComplExModel final : Scorer {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<float> entity_embeddings;    // entities x 2*dim
  std::vector<float> relation_embeddings;  // relations x 2*dim

  ModelKind kind() const override { return ModelKind::kComplEx; }
  std::size_t num_entities() const override { return entities; }
  double Score(EntityId h, RelationId r, EntityId t) const override;
  void ScoreAll(Query q, std::span<float> out) const override;
  using Scorer::ScoreAll;

  static ComplExModel Initialize(std::size_t entities, std::size_t relations,
                                 const TrainConfig& config);
};

// Weighted count of distinct edge-labelled walks h -> t of length 1..L over
// the train adjacency (inverse edges included once augmented), where L is
// the number of hop weights. Each length's count saturates at `saturation`.
struct PathCountModel final : Scorer {
  std::shared_ptr<const Adjacency> adjacency;
  std::vector<double> hop_weights = {1.0, 0.5};
  double saturation = 10.0;

  PathCountModel() = default;
  PathCountModel(std::shared_ptr<const Adjacency> adj,
                 std::vector<double> weights = {1.0, 0.5},
                 double saturation = 10.0);

  ModelKind kind() const override { return ModelKind::kPathCount; }
  std::size_t num_entities() const override {
    return adjacency ? adjacency->num_entities() : 0;
  }
  double Score(EntityId h, RelationId r, EntityId t) const override;
  void ScoreAll(Query q, std::span<float> out) const override;
  using Scorer::ScoreAll;
};

// --- Scoring kernels ----------------------------------------------------
// Templated on the scalar so the gradient check can run them in double.

// sum_i |h_i * exp(i phase_i) - t_i| over complex components.
template <typename T>
T RotatEDistance(const T* head, const T* phase, const T* tail,
                 std::size_t dim) {
  T total = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    const T c = std::cos(phase[i]);
    const T s = std::sin(phase[i]);
    const T re = head[i] * c - head[dim + i] * s - tail[i];
    const T im = head[i] * s + head[dim + i] * c - tail[dim + i];
    total += std::sqrt(re * re + im * im);
  }
  return total;
}

// Re(<h, r, conj(t)>).
template <typename T>
T ComplExTrilinear(const T* head, const T* rel, const T* tail,
                   std::size_t dim) {
  T total = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    const T hr = head[i], hi = head[dim + i];
    const T rr = rel[i], ri = rel[dim + i];
    const T tr = tail[i], ti = tail[dim + i];
    total += hr * rr * tr - hi * ri * tr + hr * ri * ti + hi * rr * ti;
  }
  return total;
}

// --- Training loss --------------------------------------------------------

// Parameter tables viewed as flat row-major arrays.
template <typename T>
struct EmbeddingTables {
  std::span<T> entity;    // rows of entity_width
  std::span<T> relation;  // rows of relation_width
  std::size_t dim = 0;
  std::size_t entity_width = 0;
  std::size_t relation_width = 0;
};

// Row-sparse gradient accumulator for one table.
template <typename T>
class SparseGrad {
 public:
  SparseGrad(std::size_t rows, std::size_t width)
      : width_(width), slot_(rows, -1) {}

  T* Row(std::size_t row) {
    if (slot_[row] < 0) {
      slot_[row] = static_cast<std::int64_t>(rows_.size());
      rows_.push_back(row);
      values_.resize(values_.size() + width_, T(0));
    }
    return values_.data() + static_cast<std::size_t>(slot_[row]) * width_;
  }
  const T* Find(std::size_t row) const {
    return slot_[row] < 0 ? nullptr
                          : values_.data() +
                                static_cast<std::size_t>(slot_[row]) * width_;
  }
  void Clear() {
    for (std::size_t r : rows_) slot_[r] = -1;
    rows_.clear();
    values_.clear();
  }
  const std::vector<std::size_t>& rows() const { return rows_; }
  std::size_t width() const { return width_; }

 private:
  std::size_t width_;
  std::vector<std::int64_t> slot_;
  std::vector<std::size_t> rows_;
  std::vector<T> values_;
};

struct TrainingSample {
  Triple positive;
  std::vector<EntityId> negative_tails;
};

struct LossOptions {
  ModelKind kind = ModelKind::kRotatE;
  double gamma = 12.0;
  double adversarial_temperature = 1.0;
  double regularization = 0.0;
};

// Self-adversarial weights softmax(temperature * score) over each sample's
// negatives, computed from the current parameters. Treated as constants by
// the loss gradient.
template <typename T>
std::vector<std::vector<T>> AdversarialWeights(
    const EmbeddingTables<T>& tables, std::span<const TrainingSample> batch,
    const LossOptions& options);

// Mean over the batch of
//   0.5 * (-log sigmoid(s+) - sum_j p_j log sigmoid(-s_j)) + reg,
// with s = gamma - distance for RotatE and the trilinear score for ComplEx.
// Adds d(loss)/d(params) to the gradient accumulators when non-null.
template <typename T>
T BatchLoss(const EmbeddingTables<T>& tables,
            std::span<const TrainingSample> batch,
            const std::vector<std::vector<T>>& adversarial_weights,
            const LossOptions& options, SparseGrad<T>* entity_grad,
            SparseGrad<T>* relation_grad);

struct TrainLog {
  double probe_loss_initial = 0.0;
  std::vector<double> probe_loss_after_epoch;
  std::vector<double> mean_epoch_loss;
};

// Trains RotatE or ComplEx with self-adversarial negative sampling and
// row-sparse Adam. Deterministic given config.seed. Entities that never
// appear in train (unseen valid/test entities) keep their initialization.
std::unique_ptr<Scorer> TrainEmbeddingModel(ModelKind kind,
                                            const KnowledgeGraph& kg,
                                            const TrainConfig& config,
                                            TrainLog* log = nullptr);

RotatEModel TrainRotatE(const KnowledgeGraph& kg, const TrainConfig& config,
                        TrainLog* log = nullptr);
ComplExModel TrainComplEx(const KnowledgeGraph& kg, const TrainConfig& config,
                          TrainLog* log = nullptr);

// Builds the structural scorer over kg's train adjacency.
PathCountModel MakePathCountModel(const KnowledgeGraph& kg,
                                  std::vector<double> hop_weights = {1.0, 0.5},
                                  double saturation = 10.0);

// --- Checkpoints ----------------------------------------------------------
// Layout: "KGEM", u32 version, u8 kind, u32 |E|, u32 |R|, u32 d, u64 seed,
// then little-endian f32 parameters. RotatE: gamma, entity table, phase
// table. ComplEx: entity table, relation table. PathCount (d = #hop weights):
// saturation, hop weights.

inline constexpr std::uint32_t kModelCheckpointVersion = 1;

void SaveModel(const Scorer& model, const std::filesystem::path& path);
// PathCount checkpoints reattach to `kg`'s adjacency, which must be given.
std::unique_ptr<Scorer> LoadModel(const std::filesystem::path& path,
                                  const KnowledgeGraph* kg = nullptr);

}  // namespace kgcfuse

#include "kgcfuse/models_impl.hpp"

#endif  // KGCFUSE_MODELS_HPP_
