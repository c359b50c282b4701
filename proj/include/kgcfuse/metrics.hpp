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

// Filtered ranking evaluation (MR, MRR, Hits@k) and paired significance tests.

#ifndef KGCFUSE_METRICS_HPP_
#define KGCFUSE_METRICS_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgcfuse/common.hpp"
#include "kgcfuse/kg.hpp"

namespace kgcfuse {

// How entities scoring exactly as high as the gold answer are counted.
//   kOptimistic: not at all (rank = 1 + #strictly greater).
//   kMean: half each, i.e. the expected rank under uniform tie-breaking.
enum class TieMode : std::uint8_t { kOptimistic = 0, kMean = 1 };

// Rank of `gold` among all entities except the known-true ones in `filter`
// (sorted ascending; `gold` itself is never filtered). Returns a double so
// kMean can yield half ranks; under kOptimistic the value is integral.
template <typename Score>
double FilteredRank(std::span<const Score> scores, EntityId gold,
                    std::span<const EntityId> filter,
                    TieMode mode = TieMode::kOptimistic) {
  if (gold >= scores.size()) {
    Fail(Error::Kind::kInvalidArgument,
         "gold entity " + std::to_string(gold) + " out of range (|E|=" +
             std::to_string(scores.size()) + ")");
  }
  const Score target = scores[gold];
  std::size_t greater = 0;
  std::size_t ties = 0;
  std::size_t f = 0;
  const std::size_t n = scores.size();
  for (std::size_t e = 0; e < n; ++e) {
    while (f < filter.size() && filter[f] < e) ++f;
    if (e == gold) continue;
    if (f < filter.size() && filter[f] == e) continue;
    if (scores[e] > target) {
      ++greater;
    } else if (scores[e] == target) {
      ++ties;
    }
  }
  double rank = 1.0 + static_cast<double>(greater);
  if (mode == TieMode::kMean) rank += 0.5 * static_cast<double>(ties);
  return rank;
}

struct RankOutcome {
  Query query;
  EntityId gold = 0;
  double rank = 1.0;
};

inline constexpr std::array<int, 3> kHitsAt = {1, 3, 10};

struct MetricsReport {
  double mr = 0.0;
  double mrr = 0.0;
  std::array<double, 3> hits = {0.0, 0.0, 0.0};  // aligned with kHitsAt
  std::size_t n_queries = 0;

  double Hits(int k) const;

  // "mr=...\nmrr=...\nhits1=...\n..." with fractions, not percents.
  std::string ToKeyValue() const;
  // {"mr":..,"mrr":..,"hits1":..,"hits3":..,"hits10":..,"n":..}; `method`
  // is added as a "method" key when non-empty.
  std::string ToJson(const std::string& method = "") const;
  static MetricsReport FromJson(const std::string& text);
};

MetricsReport Aggregate(std::span<const RankOutcome> outcomes);
MetricsReport AggregateRanks(std::span<const double> ranks);

// Paired Student t statistic of a - b (sample sd, n-1 denominator).
// Throws kDegenerate when the differences have zero variance.
double PairedTTest(std::span<const double> a, std::span<const double> b);

// Shuffles [0, n) with `seed` and cuts it into k folds whose sizes differ by
// at most one; the first n % k folds get the extra element.
std::vector<std::vector<std::size_t>> KFoldSplit(std::size_t n, int k,
                                                 std::uint64_t seed);

template <typename T>
std::vector<std::vector<T>> KFoldSplit(std::span<const T> items, int k,
                                       std::uint64_t seed) {
  std::vector<std::vector<T>> folds;
  for (const auto& fold : KFoldSplit(items.size(), k, seed)) {
    auto& out = folds.emplace_back();
    out.reserve(fold.size());
    for (std::size_t i : fold) out.push_back(items[i]);
  }
  return folds;
}

}  // namespace kgcfuse

#endif  // KGCFUSE_METRICS_HPP_
