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

#include "kgcfuse/baselines.hpp"

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "kgcfuse/random.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace kgcfuse {
namespace {

// Gold tails drawn at random for `queries` queries over `entities`.
struct Task {
  std::vector<Triple> gold;
  FilterIndex filter;
};

Task RandomTask(std::size_t queries, std::size_t entities, std::uint64_t seed) {
  Rng rng(seed);
  Task t;
  for (std::size_t q = 0; q < queries; ++q) {
    const Triple g{static_cast<EntityId>(q % entities), 0,
                   static_cast<EntityId>(rng.Below(entities))};
    t.gold.push_back(g);
    t.filter.Add(g);
    // A second known answer to exercise filtering.
    t.filter.Add({g.head, 0, static_cast<EntityId>(rng.Below(entities))});
  }
  t.filter.Finalize();
  return t;
}

// Anchor that puts gold near the top with some noise.
ScoreMatrix InformativeMatrix(const Task& task, std::size_t entities, std::uint64_t seed) {
  ScoreMatrix m = testing::RandomMatrix(task.gold, entities, seed, "anchor");
  Rng rng(seed + 1);
  for (std::size_t q = 0; q < task.gold.size(); ++q) {
    m.Row(q)[task.gold[q].tail] += static_cast<float>(rng.Uniform(0.3, 1.0));
  }
  return m;
}

TEST(DefaultStaticGridTest, Layout) {
  const auto grid = DefaultStaticGrid();
  ASSERT_EQ(grid.size(), 61u + 3u);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_NEAR(grid[1], 0.05, 1e-12);
  EXPECT_NEAR(grid[60], 3.0, 1e-12);
  EXPECT_EQ((std::vector<double>(grid.end() - 3, grid.end())),
            (std::vector<double>{10, 100, 1e6}));
}

TEST(TuneStaticTest, NoiseModelGetsZeroWeight) {
  const Task task = RandomTask(200, 60, 1);
  const ScoreMatrix anchor = InformativeMatrix(task, 60, 2);
  // Noise that only ever hurts: gold is pinned to the row minimum.
  ScoreMatrix noise = testing::RandomMatrix(task.gold, 60, 3, "noise", 0.1, 1.0);
  for (std::size_t q = 0; q < task.gold.size(); ++q) noise.Row(q)[task.gold[q].tail] = 0.0f;
  const ScoreMatrix* m[] = {&anchor, &noise};
  const auto grid = DefaultStaticGrid();
  const StaticEnsemble s = TuneStatic(m, task.gold, task.filter, 0, grid);
  EXPECT_EQ(s.weights, (std::vector<double>{1.0, 0.0}));
  const double anchor_mrr =
      AggregateRanks(WeightedRanks(m, std::vector<double>{1.0, 0.0}, task.gold, task.filter)).mrr;
  EXPECT_EQ(s.validation_mrr, anchor_mrr);
  // Brute force over the grid agrees on the best value.
  double best = 0.0;
  for (double w : grid) {
    best = std::max(best, AggregateRanks(WeightedRanks(m, std::vector<double>{1.0, w},
                                                       task.gold, task.filter)).mrr);
  }
  EXPECT_EQ(best, s.validation_mrr);
}

TEST(TuneStaticTest, IdenticalModelsTieToZero) {
  const Task task = RandomTask(50, 20, 4);
  const ScoreMatrix a = InformativeMatrix(task, 20, 5);
  const ScoreMatrix* m[] = {&a, &a};
  const std::vector<double> grid = {0, 1};
  EXPECT_EQ(TuneStatic(m, task.gold, task.filter, 0, grid).weights[1], 0.0);
}

TEST(TuneStaticTest, DominatesAnchorAndMatchesExhaustiveSearch) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Task task = RandomTask(80, 30, seed);
    const ScoreMatrix a = InformativeMatrix(task, 30, 10 + seed);
    const ScoreMatrix b = InformativeMatrix(task, 30, 50 + seed);
    const ScoreMatrix* m[] = {&a, &b};
    const auto grid = DefaultStaticGrid();
    const StaticEnsemble s = TuneStatic(m, task.gold, task.filter, 0, grid);
    const double anchor =
        AggregateRanks(WeightedRanks(m, std::vector<double>{1, 0}, task.gold, task.filter)).mrr;
    EXPECT_GE(s.validation_mrr, anchor);
    double best = -1.0, best_w = -1.0;
    for (double w : grid) {
      const double mrr = AggregateRanks(
          WeightedRanks(m, std::vector<double>{1, w}, task.gold, task.filter)).mrr;
      if (mrr > best) {
        best = mrr;
        best_w = w;
      }
    }
    EXPECT_EQ(s.weights[1], best_w);
    EXPECT_EQ(s.validation_mrr, best);
  }
}

TEST(TuneStaticTest, ThreeModelsAndSingleModel) {
  const Task task = RandomTask(60, 25, 7);
  const ScoreMatrix a = InformativeMatrix(task, 25, 1), b = InformativeMatrix(task, 25, 2),
                    c = InformativeMatrix(task, 25, 3);
  const ScoreMatrix* three[] = {&a, &b, &c};
  const auto grid = DefaultStaticGrid();
  const StaticEnsemble s = TuneStatic(three, task.gold, task.filter, 1, grid);
  ASSERT_EQ(s.weights.size(), 3u);
  EXPECT_EQ(s.weights[1], 1.0);
  const double anchor =
      AggregateRanks(WeightedRanks(three, std::vector<double>{0, 1, 0}, task.gold, task.filter)).mrr;
  EXPECT_GE(s.validation_mrr, anchor);
  const ScoreMatrix* one[] = {&a};
  const std::vector<double> zero = {0};
  EXPECT_EQ(TuneStatic(one, task.gold, task.filter, 0, zero).weights, (std::vector<double>{1}));
  const std::vector<double> no_zero = {1, 2};
  EXPECT_THROW(TuneStatic(three, task.gold, task.filter, 0, no_zero), Error);
}

// Literal construction of the re-ranked order.
std::vector<EntityId> BruteRerankOrder(const std::vector<double>& primary,
                                       const std::vector<double>& secondary, EntityId gold,
                                       const std::set<EntityId>& known, std::size_t k) {
  std::vector<EntityId> pool;
  for (EntityId e = 0; e < primary.size(); ++e) {
    if (e == gold || !known.contains(e)) pool.push_back(e);
  }
  std::sort(pool.begin(), pool.end(), [&](EntityId a, EntityId b) {
    if (primary[a] != primary[b]) return primary[a] > primary[b];
    if ((a == gold) != (b == gold)) return a == gold;
    return a < b;
  });
  const std::size_t top = std::min(k, pool.size());
  std::stable_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(top),
                   [&](EntityId a, EntityId b) { return secondary[a] > secondary[b]; });
  return pool;
}

TEST(RerankTest, MatchesLiteralConstruction) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.Below(30);
    std::vector<double> p(n), s(n);
    for (std::size_t e = 0; e < n; ++e) {
      p[e] = static_cast<double>(rng.Below(5));
      s[e] = static_cast<double>(rng.Below(5));
    }
    const auto gold = static_cast<EntityId>(rng.Below(n));
    std::set<EntityId> known;
    for (std::size_t i = 0; i < n / 4; ++i) known.insert(static_cast<EntityId>(rng.Below(n)));
    const std::vector<EntityId> filter(known.begin(), known.end());
    const std::size_t k = rng.Below(n + 2);
    const auto expected = BruteRerankOrder(p, s, gold, known, k);
    EXPECT_EQ(RerankOrder(p, s, gold, filter, k), expected);
    const auto pos = std::find(expected.begin(), expected.end(), gold) - expected.begin();
    EXPECT_EQ(RerankRank(p, s, gold, filter, k), static_cast<double>(pos + 1));
  }
}

TEST(RerankTest, HandExamples) {
  const std::vector<double> primary = {0.9, 0.8, 0.7, 0.6, 0.5};
  const std::vector<double> secondary = {0.1, 0.2, 0.9, 0.3, 0.8};
  // Gold 2 is in the top 3 and secondary likes it best.
  EXPECT_EQ(RerankRank(primary, secondary, 2, {}, 3), 1.0);
  // Gold 4 is outside the top 3: primary rank stays.
  EXPECT_EQ(RerankRank(primary, secondary, 4, {}, 3), 5.0);
}

TEST(RerankTest, LimitCasesOnContinuousScores) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.Below(40);
    std::vector<double> p(n), s(n);
    for (std::size_t e = 0; e < n; ++e) {
      p[e] = rng.Uniform01();
      s[e] = rng.Uniform01();
    }
    const auto gold = static_cast<EntityId>(rng.Below(n));
    const std::vector<EntityId> filter = {static_cast<EntityId>((gold + 1) % n)};
    EXPECT_EQ(RerankRank(p, s, gold, filter, 0), FilteredRank<double>(p, gold, filter));
    EXPECT_EQ(RerankRank(p, s, gold, filter, n), FilteredRank<double>(s, gold, filter));
  }
}

TEST(RoutingTest, Kgt5RouteByTrainAnswers) {
  FilterIndex train;
  train.Add({0, 0, 1});
  train.Add({0, 0, 2});
  train.Add({0, 0, 3});
  train.Finalize();
  EXPECT_EQ(Kgt5Route({0, 0}, train), Route::kStructural);
  EXPECT_EQ(Kgt5Route({1, 0}, train), Route::kTextual);
}

TEST(RoutingTest, SplitSelectAndRoutedRanks) {
  const std::vector<std::uint8_t> reach = {1, 0, 1};
  EXPECT_EQ(SplitSelect(0, reach), Route::kStructural);
  EXPECT_EQ(SplitSelect(1, reach), Route::kTextual);
  EXPECT_THROW(SplitSelect(3, reach), Error);
  std::vector<Route> routes;
  for (std::size_t q = 0; q < 3; ++q) routes.push_back(SplitSelect(q, reach));
  const std::vector<double> structural = {1, 9, 4}, textual = {5, 2, 7};
  EXPECT_EQ(RoutedRanks(routes, structural, textual), (std::vector<double>{1, 2, 4}));
  const auto report = AggregateRanks(RoutedRanks(routes, structural, textual));
  EXPECT_EQ(report.n_queries, 3u);
}

TEST(BestOracleTest, PicksMinimumAndDominates) {
  const std::vector<std::vector<double>> two = {{3, 2, 8}, {1, 5, 8}};
  EXPECT_EQ(BestOracleRanks(two), (std::vector<double>{1, 2, 8}));
  const std::vector<std::vector<double>> same = {{3, 2, 8}, {3, 2, 8}};
  EXPECT_EQ(BestOracle(same).mrr, AggregateRanks(same[0]).mrr);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> ranks(3, std::vector<double>(40));
    for (auto& r : ranks) {
      for (double& x : r) x = 1.0 + static_cast<double>(rng.Below(20));
    }
    const MetricsReport o = BestOracle(ranks);
    for (const auto& r : ranks) {
      const MetricsReport m = AggregateRanks(r);
      EXPECT_GE(o.mrr, m.mrr);
      EXPECT_LE(o.mr, m.mr);
      for (int k : kHitsAt) EXPECT_GE(o.Hits(k), m.Hits(k));
    }
  }
}

}  // namespace
}  // namespace kgcfuse
