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

// Fusion methods the dynamic ensemble is compared against: a constant weight
// tuned on validation, top-k re-ranking, routing rules and the per-query
// best-model oracle.

#ifndef KGCFUSE_BASELINES_HPP_
#define KGCFUSE_BASELINES_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "kgcfuse/kg.hpp"
#include "kgcfuse/metrics.hpp"
#include "kgcfuse/score_store.hpp"

namespace kgcfuse {

// {0, 0.05, ..., 3.0} followed by {10, 100, 1e6}.
std::vector<double> DefaultStaticGrid();

struct StaticEnsemble {
  std::size_t anchor = 0;
  // One per model; the anchor's entry is 1.
  std::vector<double> weights;
  std::vector<double> grid;
  double validation_mrr = 0.0;
};

// Ranks of the gold tails under E = sum_i weights[i] * normalized row_i.
std::vector<double> WeightedRanks(std::span<const ScoreMatrix* const> matrices,
                                  std::span<const double> weights,
                                  std::span<const Triple> gold,
                                  const FilterIndex& filter,
                                  TieMode tie = TieMode::kOptimistic);

// Chooses each non-anchor weight from `grid` by validation MRR, ties going to
// the smaller weight. Two models are searched exhaustively; with more, one
// coordinate at a time for `sweeps` rounds starting from all zeros.
StaticEnsemble TuneStatic(std::span<const ScoreMatrix* const> matrices,
                          std::span<const Triple> gold,
                          const FilterIndex& filter, std::size_t anchor,
                          std::span<const double> grid,
                          TieMode tie = TieMode::kOptimistic, int sweeps = 2);

// Entity order after taking the primary model's top_k (filtered) entities and
// re-sorting them by the secondary score; everything else follows in primary
// order. Filtered entities other than gold are dropped. Primary order breaks
// ties in favour of gold and then by entity id; window ties keep primary order.
std::vector<EntityId> RerankOrder(std::span<const double> primary,
                                  std::span<const double> secondary,
                                  EntityId gold,
                                  std::span<const EntityId> filter,
                                  std::size_t top_k);

// 1-based position of gold in RerankOrder, computed without a full sort.
double RerankRank(std::span<const double> primary,
                  std::span<const double> secondary, EntityId gold,
                  std::span<const EntityId> filter, std::size_t top_k);

std::vector<double> RerankRanks(const ScoreMatrix& primary,
                                const ScoreMatrix& secondary,
                                std::span<const Triple> gold,
                                const FilterIndex& filter, std::size_t top_k);

enum class Route : std::uint8_t { kStructural = 0, kTextual = 1 };

// Textual for queries with no train answers, structural otherwise.
Route Kgt5Route(Query query, const FilterIndex& train_answers);

// Structural on reachable queries, textual on unreachable ones.
Route SplitSelect(std::size_t query_index,
                  std::span<const std::uint8_t> is_reachable);

// Picks per query the rank of the routed model.
std::vector<double> RoutedRanks(std::span<const Route> routes,
                                std::span<const double> structural_ranks,
                                std::span<const double> textual_ranks);

// Per-query minimum rank over all models.
std::vector<double> BestOracleRanks(
    std::span<const std::vector<double>> per_model_ranks);
MetricsReport BestOracle(std::span<const std::vector<double>> per_model_ranks);

}  // namespace kgcfuse

#endif  // KGCFUSE_BASELINES_HPP_
