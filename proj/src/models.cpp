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

#include "kgcfuse/models.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "kgcfuse/binary_io.hpp"
#include "kgcfuse/random.hpp"

namespace kgcfuse {

std::string_view ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRotatE:
      return "rotate";
    case ModelKind::kComplEx:
      return "complex";
    case ModelKind::kPathCount:
      return "pathcount";
  }
  return "?";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "rotate" || name == "RotatE") return ModelKind::kRotatE;
  if (name == "complex" || name == "ComplEx") return ModelKind::kComplEx;
  if (name == "pathcount" || name == "PathCount") return ModelKind::kPathCount;
  Fail(Error::Kind::kInvalidArgument,
       "unknown model kind '" + std::string(name) +
           "' (rotate|complex|pathcount)");
}

void TrainConfig::Validate() const {
  Require(dim > 0, "dim must be positive");
  Require(epochs >= 0, "epochs must be non-negative");
  Require(batch_size > 0, "batch_size must be positive");
  Require(negatives_per_positive > 0, "negatives_per_positive must be positive");
  Require(learning_rate > 0, "learning_rate must be positive");
  Require(adversarial_temperature > 0,
          "adversarial_temperature must be positive");
  Require(gamma > 0, "gamma must be positive");
  Require(regularization >= 0, "regularization must be non-negative");
}

// --- RotatE ---------------------------------------------------------------

RotatEModel RotatEModel::Initialize(std::size_t entities, std::size_t relations,
                                    const TrainConfig& config) {
  config.Validate();
  RotatEModel m;
  m.entities = entities;
  m.relations = relations;
  m.dim = static_cast<std::size_t>(config.dim);
  m.gamma = static_cast<float>(config.gamma);
  m.seed = config.seed;
  Rng rng(DeriveSeed(config.seed, 0));
  const double range = (config.gamma + 2.0) / config.dim;
  m.entity_embeddings.resize(entities * 2 * m.dim);
  for (float& x : m.entity_embeddings) {
    x = static_cast<float>(rng.Uniform(-range, range));
  }
  m.relation_phases.resize(relations * m.dim);
  for (float& x : m.relation_phases) {
    x = static_cast<float>(rng.Uniform(-std::numbers::pi, std::numbers::pi));
  }
  return m;
}

double RotatEModel::Score(EntityId h, RelationId r, EntityId t) const {
  Require(h < entities && t < entities && r < relations, "id out of range");
  return -static_cast<double>(RotatEDistance(
      entity_embeddings.data() + h * 2 * dim, relation_phases.data() + r * dim,
      entity_embeddings.data() + t * 2 * dim, dim));
}

void RotatEModel::ScoreAll(Query q, std::span<float> out) const {
  Require(q.head < entities && q.relation < relations, "id out of range");
  Require(out.size() == entities, "output size must equal |E|");
  const float* h = entity_embeddings.data() + q.head * 2 * dim;
  const float* ph = relation_phases.data() + q.relation * dim;
  std::vector<float> rotated(2 * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const float c = std::cos(ph[i]);
    const float s = std::sin(ph[i]);
    rotated[i] = h[i] * c - h[dim + i] * s;
    rotated[dim + i] = h[i] * s + h[dim + i] * c;
  }
  // Same operation order as RotatEDistance so batched == per-triple exactly.
  for (std::size_t e = 0; e < entities; ++e) {
    const float* t = entity_embeddings.data() + e * 2 * dim;
    float total = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const float re = rotated[i] - t[i];
      const float im = rotated[dim + i] - t[dim + i];
      total += std::sqrt(re * re + im * im);
    }
    out[e] = -total;
  }
}

// --- ComplEx --------------------------------------------------------------

ComplExModel ComplExModel::Initialize(std::size_t entities,
                                      std::size_t relations,
                                      const TrainConfig& config) {
  config.Validate();
  ComplExModel m;
  m.entities = entities;
  m.relations = relations;
  m.dim = static_cast<std::size_t>(config.dim);
  m.seed = config.seed;
  Rng rng(DeriveSeed(config.seed, 0));
  const double range = 1.0 / std::sqrt(static_cast<double>(config.dim));
  m.entity_embeddings.resize(entities * 2 * m.dim);
  for (float& x : m.entity_embeddings) {
    x = static_cast<float>(rng.Uniform(-range, range));
  }
  m.relation_embeddings.resize(relations * 2 * m.dim);
  for (float& x : m.relation_embeddings) {
    x = static_cast<float>(rng.Uniform(-range, range));
  }
  return m;
}

double ComplExModel::Score(EntityId h, RelationId r, EntityId t) const {
  Require(h < entities && t < entities && r < relations, "id out of range");
  // Evaluated via the composed head so it matches ScoreAll bit for bit.
  const float* hv = entity_embeddings.data() + h * 2 * dim;
  const float* rv = relation_embeddings.data() + r * 2 * dim;
  const float* tv = entity_embeddings.data() + t * 2 * dim;
  float total = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    const float cr = hv[i] * rv[i] - hv[dim + i] * rv[dim + i];
    const float ci = hv[i] * rv[dim + i] + hv[dim + i] * rv[i];
    total += cr * tv[i] + ci * tv[dim + i];
  }
  return total;
}

void ComplExModel::ScoreAll(Query q, std::span<float> out) const {
  Require(q.head < entities && q.relation < relations, "id out of range");
  Require(out.size() == entities, "output size must equal |E|");
  const float* hv = entity_embeddings.data() + q.head * 2 * dim;
  const float* rv = relation_embeddings.data() + q.relation * 2 * dim;
  std::vector<float> composed(2 * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    composed[i] = hv[i] * rv[i] - hv[dim + i] * rv[dim + i];
    composed[dim + i] = hv[i] * rv[dim + i] + hv[dim + i] * rv[i];
  }
  for (std::size_t e = 0; e < entities; ++e) {
    const float* tv = entity_embeddings.data() + e * 2 * dim;
    float total = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      total += composed[i] * tv[i] + composed[dim + i] * tv[dim + i];
    }
    out[e] = total;
  }
}

// --- PathCount ------------------------------------------------------------

PathCountModel::PathCountModel(std::shared_ptr<const Adjacency> adj,
                               std::vector<double> weights, double sat)
    : adjacency(std::move(adj)), hop_weights(std::move(weights)),
      saturation(sat) {
  Require(adjacency != nullptr, "PathCount needs an adjacency");
  Require(!hop_weights.empty(), "PathCount needs at least one hop weight");
  for (double w : hop_weights) Require(w >= 0, "hop weights must be >= 0");
  Require(saturation > 0, "saturation must be positive");
}

void PathCountModel::ScoreAll(Query q, std::span<float> out) const {
  const std::size_t n = num_entities();
  Require(out.size() == n, "output size must equal |E|");
  Require(q.head < n, "id out of range");
  std::vector<double> total(n, 0.0);
  std::vector<double> cur(n, 0.0), next(n, 0.0);
  std::vector<EntityId> cur_nodes{q.head}, next_nodes;
  cur[q.head] = 1.0;
  for (double weight : hop_weights) {
    next_nodes.clear();
    for (EntityId u : cur_nodes) {
      const double walks = cur[u];
      for (const auto& edge : adjacency->Neighbors(u)) {
        if (next[edge.target] == 0.0) next_nodes.push_back(edge.target);
        next[edge.target] += walks;
      }
    }
    for (EntityId u : cur_nodes) cur[u] = 0.0;
    for (EntityId v : next_nodes) {
      total[v] += weight * std::min(next[v], saturation);
    }
    std::swap(cur, next);
    cur_nodes.swap(next_nodes);
  }
  for (std::size_t e = 0; e < n; ++e) out[e] = static_cast<float>(total[e]);
}

double PathCountModel::Score(EntityId h, RelationId r, EntityId t) const {
  Require(t < num_entities(), "id out of range");
  return ScoreAll(Query{h, r})[t];
}

PathCountModel MakePathCountModel(const KnowledgeGraph& kg,
                                  std::vector<double> hop_weights,
                                  double saturation) {
  return PathCountModel(std::make_shared<Adjacency>(kg.adjacency),
                        std::move(hop_weights), saturation);
}

// --- Training -------------------------------------------------------------

namespace {

class SparseAdam {
 public:
  SparseAdam(std::size_t size, double lr) : m_(size, 0.0f), v_(size, 0.0f), lr_(lr) {}

  void Step(std::span<float> params, const SparseGrad<float>& grad, long step) {
    const double b1t = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double b2t = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    const std::size_t w = grad.width();
    for (std::size_t row : grad.rows()) {
      const float* g = grad.Find(row);
      for (std::size_t i = 0; i < w; ++i) {
        const std::size_t k = row * w + i;
        m_[k] = static_cast<float>(kBeta1 * m_[k] + (1 - kBeta1) * g[i]);
        v_[k] = static_cast<float>(kBeta2 * v_[k] + (1 - kBeta2) * g[i] * g[i]);
        const double mhat = m_[k] / b1t;
        const double vhat = v_[k] / b2t;
        params[k] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + kEps));
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<float> m_, v_;
  double lr_;
};

struct TrainableTables {
  std::vector<float>* entity;
  std::vector<float>* relation;
  std::size_t dim;
  std::size_t relation_width;
};

void RunTraining(const KnowledgeGraph& kg, const TrainConfig& config,
                 ModelKind kind, TrainableTables model, TrainLog* log) {
  const auto& train = kg.split(Split::kTrain);
  if (config.epochs == 0 || train.empty()) return;

  EmbeddingTables<float> tables{*model.entity, *model.relation, model.dim,
                                2 * model.dim, model.relation_width};
  LossOptions options;
  options.kind = kind;
  options.gamma = config.gamma;
  options.adversarial_temperature = config.adversarial_temperature;
  options.regularization =
      kind == ModelKind::kComplEx ? config.regularization : 0.0;

  // Negatives come only from entities seen in train so that unseen entities
  // keep their initialization.
  std::vector<EntityId> pool;
  {
    std::vector<std::uint8_t> seen(kg.num_entities(), 0);
    for (const Triple& t : train) seen[t.head] = seen[t.tail] = 1;
    for (std::size_t e = 0; e < seen.size(); ++e) {
      if (seen[e]) pool.push_back(static_cast<EntityId>(e));
    }
  }

  auto make_sample = [&](const Triple& t, Rng& rng) {
    TrainingSample s{t, std::vector<EntityId>(config.negatives_per_positive)};
    for (EntityId& n : s.negative_tails) n = pool[rng.Below(pool.size())];
    return s;
  };

  // Fixed probe batch for monitoring.
  std::vector<TrainingSample> probe;
  {
    Rng rng(DeriveSeed(config.seed, 2));
    const std::size_t size = std::min<std::size_t>(256, train.size());
    for (std::size_t i = 0; i < size; ++i) {
      probe.push_back(make_sample(train[rng.Below(train.size())], rng));
    }
  }
  auto probe_loss = [&]() {
    const auto w = AdversarialWeights<float>(tables, probe, options);
    return static_cast<double>(
        BatchLoss<float>(tables, probe, w, options, nullptr, nullptr));
  };
  if (log) {
    *log = TrainLog{};
    log->probe_loss_initial = probe_loss();
  }

  SparseAdam entity_opt(model.entity->size(), config.learning_rate);
  SparseAdam relation_opt(model.relation->size(), config.learning_rate);
  SparseGrad<float> entity_grad(kg.num_entities(), 2 * model.dim);
  SparseGrad<float> relation_grad(kg.num_relations(), model.relation_width);
  Rng rng(DeriveSeed(config.seed, 1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingSample> batch;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(make_sample(train[order[i]], rng));
      }
      const auto weights = AdversarialWeights<float>(tables, batch, options);
      const float loss = BatchLoss<float>(tables, batch, weights, options,
                                          &entity_grad, &relation_grad);
      if (!std::isfinite(loss)) {
        Fail(Error::Kind::kNumerical,
             "training diverged: non-finite loss at epoch " +
                 std::to_string(epoch) + ", batch " + std::to_string(batches) +
                 " (try a smaller learning_rate)");
      }
      ++step;
      entity_opt.Step(*model.entity, entity_grad, step);
      relation_opt.Step(*model.relation, relation_grad, step);
      entity_grad.Clear();
      relation_grad.Clear();
      loss_sum += loss;
      ++batches;
    }
    if (log) {
      log->mean_epoch_loss.push_back(loss_sum / static_cast<double>(batches));
      log->probe_loss_after_epoch.push_back(probe_loss());
    }
  }
}

}  // namespace

RotatEModel TrainRotatE(const KnowledgeGraph& kg, const TrainConfig& config,
                        TrainLog* log) {
  Require(kg.has_inverses, "train embedding models on an inverse-augmented graph");
  RotatEModel m =
      RotatEModel::Initialize(kg.num_entities(), kg.num_relations(), config);
  RunTraining(kg, config, ModelKind::kRotatE,
              {&m.entity_embeddings, &m.relation_phases, m.dim, m.dim}, log);
  return m;
}

ComplExModel TrainComplEx(const KnowledgeGraph& kg, const TrainConfig& config,
                          TrainLog* log) {
  Require(kg.has_inverses, "train embedding models on an inverse-augmented graph");
  ComplExModel m =
      ComplExModel::Initialize(kg.num_entities(), kg.num_relations(), config);
  RunTraining(kg, config, ModelKind::kComplEx,
              {&m.entity_embeddings, &m.relation_embeddings, m.dim, 2 * m.dim},
              log);
  return m;
}

std::unique_ptr<Scorer> TrainEmbeddingModel(ModelKind kind,
                                            const KnowledgeGraph& kg,
                                            const TrainConfig& config,
                                            TrainLog* log) {
  switch (kind) {
    case ModelKind::kRotatE:
      return std::make_unique<RotatEModel>(TrainRotatE(kg, config, log));
    case ModelKind::kComplEx:
      return std::make_unique<ComplExModel>(TrainComplEx(kg, config, log));
    case ModelKind::kPathCount:
      return std::make_unique<PathCountModel>(MakePathCountModel(kg));
  }
  Fail(Error::Kind::kInvalidArgument, "unknown model kind");
}

// --- Checkpoints ----------------------------------------------------------

void SaveModel(const Scorer& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(Error::Kind::kIo, "cannot write " + path.string());
  out.write("KGEM", 4);
  binary::Write<std::uint32_t>(out, kModelCheckpointVersion);
  binary::Write<std::uint8_t>(out, static_cast<std::uint8_t>(model.kind()));
  if (const auto* m = dynamic_cast<const RotatEModel*>(&model)) {
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->entities));
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->relations));
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->dim));
    binary::Write<std::uint64_t>(out, m->seed);
    binary::Write<float>(out, m->gamma);
    binary::WriteSpan<float>(out, m->entity_embeddings);
    binary::WriteSpan<float>(out, m->relation_phases);
  } else if (const auto* m = dynamic_cast<const ComplExModel*>(&model)) {
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->entities));
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->relations));
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->dim));
    binary::Write<std::uint64_t>(out, m->seed);
    binary::WriteSpan<float>(out, m->entity_embeddings);
    binary::WriteSpan<float>(out, m->relation_embeddings);
  } else if (const auto* m = dynamic_cast<const PathCountModel*>(&model)) {
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->num_entities()));
    binary::Write<std::uint32_t>(out, 0);
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(m->hop_weights.size()));
    binary::Write<std::uint64_t>(out, 0);
    binary::Write<float>(out, static_cast<float>(m->saturation));
    for (double w : m->hop_weights) binary::Write<float>(out, static_cast<float>(w));
  } else {
    Fail(Error::Kind::kInvalidArgument, "unsupported scorer type");
  }
  if (!out) Fail(Error::Kind::kIo, "write failed for " + path.string());
}

std::unique_ptr<Scorer> LoadModel(const std::filesystem::path& path,
                                  const KnowledgeGraph* kg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(Error::Kind::kIo, "cannot open " + path.string());
  binary::ExpectMagic(in, "KGEM", "model checkpoint");
  const auto version = binary::Read<std::uint32_t>(in, "version");
  if (version != kModelCheckpointVersion) {
    Fail(Error::Kind::kFormat,
         "unsupported model checkpoint version " + std::to_string(version));
  }
  const auto kind = static_cast<ModelKind>(binary::Read<std::uint8_t>(in, "kind"));
  const auto entities = binary::Read<std::uint32_t>(in, "entity count");
  const auto relations = binary::Read<std::uint32_t>(in, "relation count");
  const auto dim = binary::Read<std::uint32_t>(in, "dimension");
  const auto seed = binary::Read<std::uint64_t>(in, "seed");
  auto read_block = [&](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    if (!binary::ReadSpan<float>(in, v)) {
      Fail(Error::Kind::kFormat, "truncated parameter block in " + path.string());
    }
  };
  switch (kind) {
    case ModelKind::kRotatE: {
      auto m = std::make_unique<RotatEModel>();
      m->entities = entities;
      m->relations = relations;
      m->dim = dim;
      m->seed = seed;
      m->gamma = binary::Read<float>(in, "gamma");
      read_block(m->entity_embeddings, std::size_t{entities} * 2 * dim);
      read_block(m->relation_phases, std::size_t{relations} * dim);
      return m;
    }
    case ModelKind::kComplEx: {
      auto m = std::make_unique<ComplExModel>();
      m->entities = entities;
      m->relations = relations;
      m->dim = dim;
      m->seed = seed;
      read_block(m->entity_embeddings, std::size_t{entities} * 2 * dim);
      read_block(m->relation_embeddings, std::size_t{relations} * 2 * dim);
      return m;
    }
    case ModelKind::kPathCount: {
      if (kg == nullptr) {
        Fail(Error::Kind::kInvalidArgument,
             "PathCount checkpoints need the knowledge graph to reattach");
      }
      if (kg->num_entities() != entities) {
        Fail(Error::Kind::kChecksum, "PathCount checkpoint entity count mismatch");
      }
      const double saturation = binary::Read<float>(in, "saturation");
      std::vector<float> weights;
      read_block(weights, dim);
      return std::make_unique<PathCountModel>(MakePathCountModel(
          *kg, std::vector<double>(weights.begin(), weights.end()), saturation));
    }
  }
  Fail(Error::Kind::kFormat, "unknown model kind tag in " + path.string());
}

}  // namespace kgcfuse
