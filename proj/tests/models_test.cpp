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
#include <numbers>

#include <gtest/gtest.h>

#include "kgcfuse/metrics.hpp"
#include "kgcfuse/random.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace kgcfuse {
namespace {

RotatEModel OneDimRotatE(double head_re, double phase, double tail_re) {
  RotatEModel m;
  m.entities = 2;
  m.relations = 1;
  m.dim = 1;
  m.entity_embeddings = {static_cast<float>(head_re), 0.0f,
                         static_cast<float>(tail_re), 0.0f};
  m.relation_phases = {static_cast<float>(phase)};
  return m;
}

TEST(RotatEScoreTest, ExactRotationScoresZero) {
  EXPECT_NEAR(OneDimRotatE(1, std::numbers::pi, -1).Score(0, 0, 1), 0.0, 1e-6);
}

TEST(RotatEScoreTest, NoRotationDistanceTwo) {
  EXPECT_NEAR(OneDimRotatE(1, 0, -1).Score(0, 0, 1), -2.0, 1e-12);
}

TEST(RotatEScoreTest, TailEqualToRotatedHeadIsMaximum) {
  TrainConfig config;
  config.dim = 8;
  RotatEModel m = RotatEModel::Initialize(3, 1, config);
  // Overwrite entity 2 with h o r.
  for (std::size_t i = 0; i < m.dim; ++i) {
    const float c = std::cos(m.relation_phases[i]), s = std::sin(m.relation_phases[i]);
    const float re = m.entity_embeddings[i], im = m.entity_embeddings[m.dim + i];
    m.entity_embeddings[2 * 2 * m.dim + i] = re * c - im * s;
    m.entity_embeddings[2 * 2 * m.dim + m.dim + i] = re * s + im * c;
  }
  const auto all = m.ScoreAll(Query{0, 0});
  EXPECT_NEAR(all[2], 0.0, 1e-5);
  EXPECT_GT(all[2], all[1]);
}

ComplExModel RealComplEx(double h, double r, double t) {
  ComplExModel m;
  m.entities = 2;
  m.relations = 1;
  m.dim = 1;
  m.entity_embeddings = {static_cast<float>(h), 0.0f, static_cast<float>(t), 0.0f};
  m.relation_embeddings = {static_cast<float>(r), 0.0f};
  return m;
}

TEST(ComplExScoreTest, RealTrilinearProduct) {
  EXPECT_DOUBLE_EQ(RealComplEx(2, 3, 4).Score(0, 0, 1), 24.0);
}

TEST(ComplExScoreTest, ZeroEmbeddingGivesZero) {
  EXPECT_EQ(RealComplEx(0, 3, 4).Score(0, 0, 1), 0.0);
  EXPECT_EQ(RealComplEx(2, 0, 4).Score(0, 0, 1), 0.0);
}

TEST(ComplExScoreTest, RealEmbeddingsAreSymmetric) {
  TrainConfig config;
  config.dim = 5;
  ComplExModel m = ComplExModel::Initialize(4, 2, config);
  for (float& x : m.entity_embeddings) x = std::abs(x);
  for (std::size_t e = 0; e < 4; ++e) {
    for (std::size_t i = 0; i < m.dim; ++i) m.entity_embeddings[e * 2 * m.dim + m.dim + i] = 0;
  }
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t i = 0; i < m.dim; ++i) m.relation_embeddings[r * 2 * m.dim + m.dim + i] = 0;
  }
  EXPECT_NEAR(m.Score(1, 1, 3), m.Score(3, 1, 1), 1e-6);
}

std::shared_ptr<Adjacency> Graph(std::size_t n, std::vector<Triple> edges) {
  return std::make_shared<Adjacency>(n, edges);
}

TEST(PathCountTest, NoPathScoresZero) {
  const PathCountModel m(Graph(3, {{0, 0, 1}}));
  EXPECT_EQ(m.Score(0, 0, 2), 0.0);
  EXPECT_EQ(m.Score(2, 0, 0), 0.0);
}

TEST(PathCountTest, SingleEdge) {
  const PathCountModel m(Graph(2, {{0, 0, 1}}));
  EXPECT_DOUBLE_EQ(m.Score(0, 0, 1), 1.0);
}

TEST(PathCountTest, TwoTwoHopPaths) {
  // h=0, x=1, y=2, t=3.
  const PathCountModel m(Graph(4, {{0, 0, 1}, {1, 0, 3}, {0, 0, 2}, {2, 1, 3}}));
  EXPECT_DOUBLE_EQ(m.Score(0, 0, 3), 1.0);
}

TEST(PathCountTest, SaturatesPerLength) {
  std::vector<Triple> edges;
  for (RelationId r = 0; r < 15; ++r) edges.push_back({0, r, 1});
  const PathCountModel m(Graph(2, edges), {1.0, 0.5}, 10.0);
  EXPECT_DOUBLE_EQ(m.Score(0, 0, 1), 10.0);
}

TEST(PathCountTest, IsolatedHeadGivesZeroVector) {
  const PathCountModel m(Graph(4, {{1, 0, 2}}));
  for (float x : m.ScoreAll(Query{0, 0})) EXPECT_EQ(x, 0.0f);
}

TEST(ScoreAllTest, ShapeAndConsistency) {
  const KnowledgeGraph kg = testing::MakeToyKg({.entities = 3, .relations = 2, .triples = 6});
  TrainConfig config;
  config.dim = 4;
  const RotatEModel rotate = RotatEModel::Initialize(3, kg.num_relations(), config);
  const ComplExModel complex = ComplExModel::Initialize(3, kg.num_relations(), config);
  const PathCountModel paths = MakePathCountModel(kg);
  for (const Scorer* m : std::initializer_list<const Scorer*>{&rotate, &complex, &paths}) {
    for (RelationId r = 0; r < kg.num_relations(); ++r) {
      const auto all = m->ScoreAll(Query{1, r});
      ASSERT_EQ(all.size(), 3u);
      for (EntityId t = 0; t < 3; ++t) {
        EXPECT_NEAR(all[t], m->Score(1, r, t), 1e-5 * (1 + std::abs(all[t])));
      }
    }
  }
}

// Double-precision copies of a model's tables for the gradient check.
struct DoubleTables {
  std::vector<double> entity, relation;
  EmbeddingTables<double> View(std::size_t dim, std::size_t relation_width) {
    return {entity, relation, dim, 2 * dim, relation_width};
  }
};

void CheckGradients(ModelKind kind) {
  const std::size_t entities = 6, relations = 3, dim = 3;
  const std::size_t relation_width = kind == ModelKind::kRotatE ? dim : 2 * dim;
  Rng rng(17);
  DoubleTables t;
  t.entity.resize(entities * 2 * dim);
  t.relation.resize(relations * relation_width);
  for (double& x : t.entity) x = rng.Uniform(-1, 1);
  for (double& x : t.relation) x = rng.Uniform(-3, 3);
  const std::vector<TrainingSample> batch = {
      {{0, 1, 2}, {3, 4, 5}}, {{4, 0, 1}, {0, 2, 2, 5}}, {{5, 2, 5}, {1, 3}}};
  LossOptions options;
  options.kind = kind;
  options.gamma = 2.0;
  options.adversarial_temperature = 0.7;
  options.regularization = kind == ModelKind::kComplEx ? 0.05 : 0.0;
  EmbeddingTables<double> view = t.View(dim, relation_width);
  const auto weights = AdversarialWeights<double>(view, batch, options);

  SparseGrad<double> eg(entities, 2 * dim), rg(relations, relation_width);
  BatchLoss<double>(view, batch, weights, options, &eg, &rg);
  auto loss = [&] {
    return BatchLoss<double>(view, batch, weights, options, nullptr, nullptr);
  };
  double worst = 0.0;
  std::size_t checked = 0;
  auto check = [&](std::vector<double>& table, const SparseGrad<double>& grad,
                   std::size_t width) {
    for (std::size_t k = 0; k < table.size(); ++k) {
      const double* row = grad.Find(k / width);
      const double analytic = row ? row[k % width] : 0.0;
      const double numeric = oracle::CentralDifference(loss, table[k], 1e-6);
      if (std::abs(analytic) < 1e-10 && std::abs(numeric) < 1e-10) continue;
      worst = std::max(worst, oracle::RelativeError(analytic, numeric));
      ++checked;
    }
  };
  check(t.entity, eg, 2 * dim);
  check(t.relation, rg, relation_width);
  EXPECT_GT(checked, 20u);
  EXPECT_LT(worst, 1e-4) << ModelKindName(kind);
}

TEST(BatchLossTest, RotatEGradientMatchesFiniteDifference) {
  CheckGradients(ModelKind::kRotatE);
}

TEST(BatchLossTest, ComplExGradientMatchesFiniteDifference) {
  CheckGradients(ModelKind::kComplEx);
}

// Two disjoint 3-cycles under one relation.
KnowledgeGraph TwoClusters() {
  KnowledgeGraph kg;
  for (int e = 0; e < 6; ++e) kg.entities.GetOrAdd("c" + std::to_string(e));
  kg.relations.GetOrAdd("next");
  kg.split(Split::kTrain) = {{0, 0, 1}, {1, 0, 2}, {2, 0, 0},
                             {3, 0, 4}, {4, 0, 5}, {5, 0, 3}};
  kg.num_base_relations = 1;
  return AugmentInverses(std::move(kg));
}

double TrainMrr(const Scorer& model, const KnowledgeGraph& kg) {
  const FilterIndex filter = BuildFilterIndex(kg);
  std::vector<double> ranks;
  for (const Triple& t : kg.split(Split::kTrain)) {
    const auto scores = model.ScoreAll(Query{t.head, t.relation});
    ranks.push_back(FilteredRank<float>(scores, t.tail, filter.Tails(t.head, t.relation)));
  }
  return AggregateRanks(ranks).mrr;
}

TrainConfig ToyTrainConfig() {
  TrainConfig config;
  config.dim = 16;
  config.epochs = 200;
  config.batch_size = 4;
  config.negatives_per_positive = 4;
  config.learning_rate = 0.02;
  config.gamma = 6.0;
  config.seed = 3;
  return config;
}

TEST(TrainEmbeddingTest, RotatEFitsTwoClusters) {
  const KnowledgeGraph kg = TwoClusters();
  TrainLog log;
  const RotatEModel m = TrainRotatE(kg, ToyTrainConfig(), &log);
  EXPECT_GE(TrainMrr(m, kg), 0.9);
  EXPECT_LT(log.probe_loss_after_epoch.back(), log.probe_loss_initial);
  ASSERT_EQ(log.mean_epoch_loss.size(), 200u);
}

TEST(TrainEmbeddingTest, ComplExFitsTwoClusters) {
  const KnowledgeGraph kg = TwoClusters();
  TrainConfig config = ToyTrainConfig();
  config.learning_rate = 0.05;
  TrainLog log;
  const ComplExModel m = TrainComplEx(kg, config, &log);
  EXPECT_GE(TrainMrr(m, kg), 0.9);
  EXPECT_LT(log.probe_loss_after_epoch.back(), log.probe_loss_initial);
}

TEST(TrainEmbeddingTest, ZeroEpochsReturnsInitialization) {
  const KnowledgeGraph kg = TwoClusters();
  TrainConfig config = ToyTrainConfig();
  config.epochs = 0;
  const RotatEModel trained = TrainRotatE(kg, config);
  const RotatEModel init = RotatEModel::Initialize(kg.num_entities(), kg.num_relations(), config);
  EXPECT_EQ(trained.entity_embeddings, init.entity_embeddings);
  EXPECT_EQ(trained.relation_phases, init.relation_phases);
}

TEST(TrainEmbeddingTest, SameSeedIsBitIdentical) {
  const KnowledgeGraph kg = TwoClusters();
  TrainConfig config = ToyTrainConfig();
  config.epochs = 20;
  const ComplExModel a = TrainComplEx(kg, config);
  const ComplExModel b = TrainComplEx(kg, config);
  EXPECT_EQ(a.entity_embeddings, b.entity_embeddings);
  EXPECT_EQ(a.relation_embeddings, b.relation_embeddings);
  config.seed = 4;
  EXPECT_NE(TrainComplEx(kg, config).entity_embeddings, a.entity_embeddings);
}

TEST(TrainEmbeddingTest, DivergenceIsReported) {
  const KnowledgeGraph kg = TwoClusters();
  TrainConfig config = ToyTrainConfig();
  config.learning_rate = 1e30;
  config.epochs = 50;
  try {
    TrainComplEx(kg, config);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Error::Kind::kNumerical);
  }
}

TEST(TrainEmbeddingTest, RequiresInverseAugmentation) {
  KnowledgeGraph kg;
  EXPECT_THROW(TrainRotatE(kg, ToyTrainConfig()), Error);
}

TEST(CheckpointTest, RoundTripsEveryKind) {
  const KnowledgeGraph kg = TwoClusters();
  const auto dir = testing::TempDir("models_ckpt");
  TrainConfig config = ToyTrainConfig();
  config.epochs = 3;
  const RotatEModel rotate = TrainRotatE(kg, config);
  const ComplExModel complex = TrainComplEx(kg, config);
  const PathCountModel paths = MakePathCountModel(kg, {1.0, 0.25, 0.125}, 4.0);
  for (const Scorer* m : std::initializer_list<const Scorer*>{&rotate, &complex, &paths}) {
    const auto path = dir / (std::string(ModelKindName(m->kind())) + ".kgem");
    SaveModel(*m, path);
    const auto back = LoadModel(path, &kg);
    ASSERT_EQ(back->kind(), m->kind());
    for (EntityId h = 0; h < kg.num_entities(); ++h) {
      EXPECT_EQ(back->ScoreAll(Query{h, 1}), m->ScoreAll(Query{h, 1}));
    }
  }
  const auto loaded = LoadModel(dir / "pathcount.kgem", &kg);
  EXPECT_EQ(dynamic_cast<const PathCountModel&>(*loaded).hop_weights, paths.hop_weights);
  EXPECT_THROW(LoadModel(dir / "pathcount.kgem"), Error);
  EXPECT_THROW(LoadModel(dir / "missing.kgem"), Error);
}

}  // namespace
}  // namespace kgcfuse
