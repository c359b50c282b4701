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

#include "kgcfuse/metrics.hpp"

#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "kgcfuse/random.hpp"
#include "support/oracles.hpp"

namespace kgcfuse {
namespace {

TEST(FilteredRankTest, HandCountedExample) {
  // A=0.9 B=0.8 C=0.7 D=0.6, gold C, B filtered.
  const std::vector<double> scores = {0.9, 0.8, 0.7, 0.6};
  const std::vector<EntityId> filter = {1};
  EXPECT_EQ(FilteredRank<double>(scores, 2, filter), 2.0);
}

TEST(FilteredRankTest, UniqueMaximumIsRankOne) {
  const std::vector<double> scores = {0.1, 0.5, 0.3};
  EXPECT_EQ(FilteredRank<double>(scores, 1, {}), 1.0);
}

TEST(FilteredRankTest, AllEqualScores) {
  const std::vector<double> scores(7, 0.25);
  EXPECT_EQ(FilteredRank<double>(scores, 3, {}), 1.0);
  EXPECT_EQ(FilteredRank<double>(scores, 3, {}, TieMode::kMean), 4.0);
}

TEST(FilteredRankTest, GoldInFilterIsStillRanked) {
  const std::vector<double> scores = {0.9, 0.8, 0.7};
  const std::vector<EntityId> filter = {0, 2};
  EXPECT_EQ(FilteredRank<double>(scores, 2, filter), 2.0);
}

TEST(FilteredRankTest, GoldOutOfRange) {
  const std::vector<double> scores = {0.9, 0.8};
  EXPECT_THROW(FilteredRank<double>(scores, 2, {}), Error);
}

TEST(FilteredRankTest, MatchesSortOracleOnRandomRows) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.Below(40);
    std::vector<float> scores(n);
    // Coarse values force ties.
    for (float& s : scores) s = static_cast<float>(rng.Below(6)) / 5.0f;
    const auto gold = static_cast<EntityId>(rng.Below(n));
    std::set<EntityId> known;
    for (std::size_t i = 0; i < n / 3; ++i) known.insert(static_cast<EntityId>(rng.Below(n)));
    const std::vector<EntityId> filter(known.begin(), known.end());
    EXPECT_EQ(FilteredRank<float>(scores, gold, filter),
              oracle::SortRank<float>(scores, gold, known, false));
    EXPECT_EQ(FilteredRank<float>(scores, gold, filter, TieMode::kMean),
              oracle::SortRank<float>(scores, gold, known, true));
  }
}

TEST(AggregateTest, HandComputedExample) {
  const std::vector<double> ranks = {1, 2, 4};
  const MetricsReport r = AggregateRanks(ranks);
  EXPECT_NEAR(r.mrr, 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(r.mr, 7.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.Hits(1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.Hits(3), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(r.Hits(10), 1.0);
  EXPECT_EQ(r.n_queries, 3u);
}

TEST(AggregateTest, AllRankOne) {
  const std::vector<double> ranks(5, 1.0);
  const MetricsReport r = AggregateRanks(ranks);
  EXPECT_EQ(r.mrr, 1.0);
  EXPECT_EQ(r.Hits(1), 1.0);
}

TEST(AggregateTest, SingleRankTen) {
  const std::vector<double> ranks = {10};
  const MetricsReport r = AggregateRanks(ranks);
  EXPECT_EQ(r.Hits(10), 1.0);
  EXPECT_EQ(r.Hits(3), 0.0);
}

TEST(AggregateTest, EmptyIsError) {
  EXPECT_THROW(AggregateRanks({}), Error);
  EXPECT_THROW(Aggregate({}), Error);
}

TEST(AggregateTest, InvariantsOnRandomRanks) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ranks(1 + rng.Below(50));
    for (double& r : ranks) r = 1.0 + static_cast<double>(rng.Below(30));
    const MetricsReport m = AggregateRanks(ranks);
    EXPECT_LE(m.Hits(1), m.Hits(3));
    EXPECT_LE(m.Hits(3), m.Hits(10));
    EXPECT_LE(m.Hits(1), m.mrr);
    EXPECT_GE(m.mr, 1.0);
    // Permutation invariance.
    rng.Shuffle(ranks);
    const MetricsReport p = AggregateRanks(ranks);
    EXPECT_NEAR(p.mrr, m.mrr, 1e-12);
    EXPECT_NEAR(p.mr, m.mr, 1e-9);
    const oracle::BruteMetrics b = oracle::BruteAggregate(ranks);
    EXPECT_NEAR(m.mrr, b.mrr, 1e-12);
    EXPECT_NEAR(m.Hits(3), b.h3, 1e-12);
  }
}

TEST(MetricsReportTest, JsonRoundTrip) {
  const std::vector<double> ranks = {1, 3, 12, 2};
  const MetricsReport r = AggregateRanks(ranks);
  const MetricsReport back = MetricsReport::FromJson(r.ToJson("x"));
  EXPECT_EQ(back.mrr, r.mrr);
  EXPECT_EQ(back.mr, r.mr);
  EXPECT_EQ(back.hits, r.hits);
  EXPECT_EQ(back.n_queries, r.n_queries);
}

TEST(PairedTTest, Wn18rrFoldPairs) {
  const std::vector<double> a = {73.5, 73.2, 73.2, 73.7, 73.2};
  const std::vector<double> b = {72.0, 72.5, 71.9, 72.3, 71.9};
  const double t = PairedTTest(a, b);
  EXPECT_NEAR(t, 8.9, 0.05);
  EXPECT_NEAR(t, oracle::TextbookPairedT(a, b), 1e-12);
}

TEST(PairedTTest, CodexMFoldPairs) {
  const std::vector<double> a = {38.7, 38.9, 38.8, 39.1, 38.7};
  const std::vector<double> b = {37.1, 37.8, 38.0, 37.8, 38.0};
  EXPECT_NEAR(PairedTTest(a, b), 6.7, 0.05);
}

TEST(PairedTTest, ConstantShiftIsDegenerate) {
  const std::vector<double> b = {1.1, 2.2, 3.3, 4.4};
  std::vector<double> a;
  for (double x : b) a.push_back(x + 0.7);
  try {
    PairedTTest(a, b);
    FAIL() << "expected degenerate error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Error::Kind::kDegenerate);
  }
}

TEST(PairedTTest, SignFollowsDifference) {
  const std::vector<double> a = {1, 2, 3, 5};
  const std::vector<double> b = {2, 2.5, 4, 5.2};
  EXPECT_LT(PairedTTest(a, b), 0);
  EXPECT_NEAR(PairedTTest(a, b), -PairedTTest(b, a), 1e-12);
}

TEST(KFoldSplitTest, EvenSplit) {
  const auto folds = KFoldSplit(10, 5, 1);
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) EXPECT_EQ(f.size(), 2u);
}

TEST(KFoldSplitTest, RemainderGoesToFirstFolds) {
  const auto folds = KFoldSplit(11, 5, 1);
  std::vector<std::size_t> sizes;
  for (const auto& f : folds) sizes.push_back(f.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 2, 2, 2, 2}));
}

TEST(KFoldSplitTest, DisjointCoverAndDeterministic) {
  const auto a = KFoldSplit(97, 5, 42);
  EXPECT_EQ(a, KFoldSplit(97, 5, 42));
  EXPECT_NE(a, KFoldSplit(97, 5, 43));
  std::set<std::size_t> all;
  for (const auto& f : a) {
    for (std::size_t i : f) EXPECT_TRUE(all.insert(i).second);
  }
  EXPECT_EQ(all.size(), 97u);
  EXPECT_EQ(*all.rbegin(), 96u);
}

TEST(KFoldSplitTest, TypedOverload) {
  const std::vector<int> items = {10, 20, 30, 40, 50, 60};
  const auto folds = KFoldSplit<int>(items, 3, 0);
  int sum = 0;
  for (const auto& f : folds) sum = std::accumulate(f.begin(), f.end(), sum);
  EXPECT_EQ(sum, 210);
}

}  // namespace
}  // namespace kgcfuse
