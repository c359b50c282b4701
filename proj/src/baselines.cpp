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
#include <cmath>

#include "kgcfuse/dynasemble.hpp"

namespace kgcfuse {

std::vector<double> DefaultStaticGrid() {
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(0.05 * i);
  grid.push_back(10.0);
  grid.push_back(100.0);
  grid.push_back(1e6);
  return grid;
}

std::vector<double> WeightedRanks(std::span<const ScoreMatrix* const> matrices,
                                  std::span<const double> weights,
                                  std::span<const Triple> gold,
                                  const FilterIndex& filter, TieMode tie) {
  CheckAligned(matrices, gold);
  Require(weights.size() == matrices.size(), "one weight per model required");
  std::vector<double> ranks;
  ranks.reserve(gold.size());
  for (std::size_t q = 0; q < gold.size(); ++q) {
    const auto rows = NormalizedRows(matrices, q);
    const auto scores = EnsembleScore(rows, weights);
    const Triple& t = gold[q];
    ranks.push_back(
        FilteredRank<double>(scores, t.tail, filter.Tails(t.head, t.relation), tie));
  }
  return ranks;
}

namespace {

// Validation MRR of every grid value for coordinate `model`, others fixed.
std::vector<double> GridMrr(std::span<const ScoreMatrix* const> matrices,
                            std::span<const Triple> gold,
                            const FilterIndex& filter, std::size_t model,
                            std::vector<double> weights,
                            std::span<const double> grid, TieMode tie) {
  std::vector<std::vector<double>> ranks(grid.size());
  for (auto& r : ranks) r.reserve(gold.size());
  for (std::size_t q = 0; q < gold.size(); ++q) {
    const auto rows = NormalizedRows(matrices, q);
    const Triple& t = gold[q];
    const auto known = filter.Tails(t.head, t.relation);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      weights[model] = grid[g];
      const auto scores = EnsembleScore(rows, weights);
      ranks[g].push_back(FilteredRank<double>(scores, t.tail, known, tie));
    }
  }
  std::vector<double> mrr;
  for (const auto& r : ranks) mrr.push_back(AggregateRanks(r).mrr);
  return mrr;
}

}  // namespace

StaticEnsemble TuneStatic(std::span<const ScoreMatrix* const> matrices,
                          std::span<const Triple> gold,
                          const FilterIndex& filter, std::size_t anchor,
                          std::span<const double> grid, TieMode tie,
                          int sweeps) {
  CheckAligned(matrices, gold);
  Require(anchor < matrices.size(), "anchor index out of range");
  Require(!grid.empty(), "static grid is empty");
  Require(std::find(grid.begin(), grid.end(), 0.0) != grid.end(),
          "static grid must contain 0");
  Require(!gold.empty(), "no validation queries");

  StaticEnsemble out;
  out.anchor = anchor;
  out.grid.assign(grid.begin(), grid.end());
  out.weights.assign(matrices.size(), 0.0);
  out.weights[anchor] = 1.0;
  if (matrices.size() == 1) {
    out.validation_mrr =
        AggregateRanks(WeightedRanks(matrices, out.weights, gold, filter, tie)).mrr;
    return out;
  }
  const int rounds = matrices.size() == 2 ? 1 : std::max(1, sweeps);
  double best = -1.0;
  for (int round = 0; round < rounds; ++round) {
    for (std::size_t m = 0; m < matrices.size(); ++m) {
      if (m == anchor) continue;
      const auto mrr = GridMrr(matrices, gold, filter, m, out.weights, grid, tie);
      std::size_t pick = 0;
      for (std::size_t g = 1; g < grid.size(); ++g) {
        if (mrr[g] > mrr[pick] || (mrr[g] == mrr[pick] && grid[g] < grid[pick])) {
          pick = g;
        }
      }
      out.weights[m] = grid[pick];
      best = mrr[pick];
    }
  }
  out.validation_mrr = best;
  return out;
}

namespace {

// Candidates (gold plus unfiltered entities) in primary order.
std::vector<EntityId> PrimaryOrder(std::span<const double> primary, EntityId gold,
                                   std::span<const EntityId> filter) {
  std::vector<EntityId> cand;
  cand.reserve(primary.size());
  std::size_t f = 0;
  for (EntityId e = 0; e < primary.size(); ++e) {
    while (f < filter.size() && filter[f] < e) ++f;
    if (e != gold && f < filter.size() && filter[f] == e) continue;
    cand.push_back(e);
  }
  std::sort(cand.begin(), cand.end(), [&](EntityId a, EntityId b) {
    if (primary[a] != primary[b]) return primary[a] > primary[b];
    if ((a == gold) != (b == gold)) return a == gold;
    return a < b;
  });
  return cand;
}

}  // namespace

std::vector<EntityId> RerankOrder(std::span<const double> primary,
                                  std::span<const double> secondary,
                                  EntityId gold,
                                  std::span<const EntityId> filter,
                                  std::size_t top_k) {
  Require(primary.size() == secondary.size(), "score row length mismatch");
  Require(gold < primary.size(), "gold entity out of range");
  std::vector<EntityId> order = PrimaryOrder(primary, gold, filter);
  const std::size_t k = std::min(top_k, order.size());
  std::stable_sort(order.begin(), order.begin() + k, [&](EntityId a, EntityId b) {
    return secondary[a] > secondary[b];
  });
  return order;
}

double RerankRank(std::span<const double> primary,
                  std::span<const double> secondary, EntityId gold,
                  std::span<const EntityId> filter, std::size_t top_k) {
  Require(primary.size() == secondary.size(), "score row length mismatch");
  Require(gold < primary.size(), "gold entity out of range");
  const double pg = primary[gold];
  std::vector<EntityId> ahead;  // candidates strictly before gold in primary order
  std::size_t f = 0;
  for (EntityId e = 0; e < primary.size(); ++e) {
    while (f < filter.size() && filter[f] < e) ++f;
    if (e == gold || (f < filter.size() && filter[f] == e)) continue;
    if (primary[e] > pg) ahead.push_back(e);
  }
  const std::size_t p = ahead.size() + 1;
  if (p > top_k) return static_cast<double>(p);
  // Gold is in the window, and every entity ahead of it is too.
  const double sg = secondary[gold];
  std::size_t before = 0;
  for (EntityId e : ahead) {
    if (secondary[e] >= sg) ++before;
  }
  // Window members behind gold in primary order only pass it on a strictly
  // higher secondary score. They are the next top_k - p candidates.
  if (top_k > p) {
    std::vector<EntityId> behind;
    f = 0;
    for (EntityId e = 0; e < primary.size(); ++e) {
      while (f < filter.size() && filter[f] < e) ++f;
      if (e == gold || (f < filter.size() && filter[f] == e)) continue;
      if (!(primary[e] > pg)) behind.push_back(e);
    }
    const std::size_t take = std::min(top_k - p, behind.size());
    auto by_primary = [&](EntityId a, EntityId b) {
      if (primary[a] != primary[b]) return primary[a] > primary[b];
      return a < b;
    };
    std::nth_element(behind.begin(), behind.begin() + take, behind.end(), by_primary);
    for (std::size_t i = 0; i < take; ++i) {
      if (secondary[behind[i]] > sg) ++before;
    }
  }
  return static_cast<double>(before + 1);
}

std::vector<double> RerankRanks(const ScoreMatrix& primary,
                                const ScoreMatrix& secondary,
                                std::span<const Triple> gold,
                                const FilterIndex& filter, std::size_t top_k) {
  const ScoreMatrix* both[] = {&primary, &secondary};
  CheckAligned(both, gold);
  std::vector<double> ranks;
  ranks.reserve(gold.size());
  for (std::size_t q = 0; q < gold.size(); ++q) {
    const auto rows = NormalizedRows(both, q);
    const Triple& t = gold[q];
    ranks.push_back(RerankRank(rows[0], rows[1], t.tail,
                               filter.Tails(t.head, t.relation), top_k));
  }
  return ranks;
}

Route Kgt5Route(Query query, const FilterIndex& train_answers) {
  return train_answers.Tails(query.head, query.relation).empty() ? Route::kTextual
                                                                 : Route::kStructural;
}

Route SplitSelect(std::size_t query_index,
                  std::span<const std::uint8_t> is_reachable) {
  if (query_index >= is_reachable.size()) {
    Fail(Error::Kind::kInvalidArgument,
         "query " + std::to_string(query_index) + " is in neither split");
  }
  return is_reachable[query_index] ? Route::kStructural : Route::kTextual;
}

std::vector<double> RoutedRanks(std::span<const Route> routes,
                                std::span<const double> structural_ranks,
                                std::span<const double> textual_ranks) {
  Require(routes.size() == structural_ranks.size() &&
              routes.size() == textual_ranks.size(),
          "routing inputs differ in length");
  std::vector<double> out(routes.size());
  for (std::size_t q = 0; q < routes.size(); ++q) {
    out[q] = routes[q] == Route::kStructural ? structural_ranks[q] : textual_ranks[q];
  }
  return out;
}

std::vector<double> BestOracleRanks(
    std::span<const std::vector<double>> per_model_ranks) {
  Require(!per_model_ranks.empty(), "oracle needs at least one model");
  std::vector<double> out = per_model_ranks[0];
  for (const auto& ranks : per_model_ranks) {
    Require(ranks.size() == out.size(), "models rank different query counts");
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = std::min(out[q], ranks[q]);
  }
  return out;
}

MetricsReport BestOracle(std::span<const std::vector<double>> per_model_ranks) {
  return AggregateRanks(BestOracleRanks(per_model_ranks));
}

}  // namespace kgcfuse
