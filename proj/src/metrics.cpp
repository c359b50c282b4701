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

#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "kgcfuse/random.hpp"

namespace kgcfuse {

double MetricsReport::Hits(int k) const {
  for (std::size_t i = 0; i < kHitsAt.size(); ++i) {
    if (kHitsAt[i] == k) return hits[i];
  }
  Fail(Error::Kind::kInvalidArgument,
       "hits@" + std::to_string(k) + " is not tracked (1, 3, 10)");
}

std::string MetricsReport::ToKeyValue() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mr=" << mr << "\nmrr=" << mrr;
  for (std::size_t i = 0; i < kHitsAt.size(); ++i) {
    out << "\nhits" << kHitsAt[i] << "=" << hits[i];
  }
  out << "\nn=" << n_queries << "\n";
  return out.str();
}

std::string MetricsReport::ToJson(const std::string& method) const {
  nlohmann::ordered_json j;
  if (!method.empty()) j["method"] = method;
  j["mr"] = mr;
  j["mrr"] = mrr;
  j["hits1"] = hits[0];
  j["hits3"] = hits[1];
  j["hits10"] = hits[2];
  j["n"] = n_queries;
  return j.dump();
}

MetricsReport MetricsReport::FromJson(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.mr = j.at("mr").get<double>();
  r.mrr = j.at("mrr").get<double>();
  r.hits = {j.at("hits1").get<double>(), j.at("hits3").get<double>(),
            j.at("hits10").get<double>()};
  r.n_queries = j.at("n").get<std::size_t>();
  return r;
}

MetricsReport AggregateRanks(std::span<const double> ranks) {
  if (ranks.empty()) {
    Fail(Error::Kind::kInvalidArgument, "cannot aggregate an empty rank list");
  }
  MetricsReport r;
  r.n_queries = ranks.size();
  std::array<std::size_t, 3> hit_counts = {0, 0, 0};
  double sum_rank = 0.0;
  double sum_rr = 0.0;
  for (double rank : ranks) {
    Require(rank >= 1.0, "ranks must be >= 1");
    sum_rank += rank;
    sum_rr += 1.0 / rank;
    for (std::size_t i = 0; i < kHitsAt.size(); ++i) {
      if (rank <= kHitsAt[i]) ++hit_counts[i];
    }
  }
  const auto n = static_cast<double>(ranks.size());
  r.mr = sum_rank / n;
  r.mrr = sum_rr / n;
  for (std::size_t i = 0; i < kHitsAt.size(); ++i) {
    r.hits[i] = static_cast<double>(hit_counts[i]) / n;
  }
  return r;
}

MetricsReport Aggregate(std::span<const RankOutcome> outcomes) {
  std::vector<double> ranks;
  ranks.reserve(outcomes.size());
  for (const auto& o : outcomes) ranks.push_back(o.rank);
  return AggregateRanks(ranks);
}

double PairedTTest(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), "paired t-test needs equal-length samples");
  Require(a.size() >= 2, "paired t-test needs at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  // Differences that are constant up to rounding of the inputs (e.g. a = b + c
  // in decimal) leave only floating-point noise in `ss`.
  const double scale = std::max(std::abs(mean), 1.0);
  if (!(sd > 1e-12 * scale)) {
    Fail(Error::Kind::kDegenerate,
         "paired t-test is degenerate: differences have zero variance");
  }
  return mean / (sd / std::sqrt(static_cast<double>(n)));
}

std::vector<std::vector<std::size_t>> KFoldSplit(std::size_t n, int k,
                                                 std::uint64_t seed) {
  Require(k >= 2, "k-fold split needs k >= 2");
  Require(n >= static_cast<std::size_t>(k), "k-fold split needs n >= k");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(order);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra);
    folds[f].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  return folds;
}

}  // namespace kgcfuse
