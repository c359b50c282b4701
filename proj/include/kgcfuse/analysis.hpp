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

// Split-wise evaluation, weight and feature statistics, the RotatE relation
// composition probe and k-fold significance runs.

#ifndef KGCFUSE_ANALYSIS_HPP_
#define KGCFUSE_ANALYSIS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgcfuse/kg.hpp"
#include "kgcfuse/metrics.hpp"
#include "kgcfuse/models.hpp"
#include "kgcfuse/score_store.hpp"

namespace kgcfuse {

struct SplitReport {
  std::string method;
  MetricsReport all;
  MetricsReport reachable;
  MetricsReport unreachable;
  // Queries whose score row was constant (every candidate tied), when known.
  std::size_t degenerate_reachable = 0;
  std::size_t degenerate_unreachable = 0;
};

// `ranks` and `is_reachable` are aligned per query. An empty side yields a
// zero report with n_queries = 0.
SplitReport EvaluateBySplit(std::string method, std::span<const double> ranks,
                            std::span<const std::uint8_t> is_reachable);

// Counts constant rows of `matrix` per side of the split.
void CountDegenerateRows(const ScoreMatrix& matrix,
                         std::span<const std::uint8_t> is_reachable,
                         SplitReport& report);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

MeanStd ComputeMeanStd(std::span<const double> values);

struct WeightStats {
  MeanStd reachable;
  MeanStd unreachable;
};

// Statistics of weights[q][model] over each side of the split.
WeightStats WeightStatsBySplit(std::span<const std::vector<double>> weights,
                               std::size_t model,
                               std::span<const std::uint8_t> is_reachable);

struct FeatureSideStats {
  double mean_of_means = 0.0;
  double mean_of_variances = 0.0;
  std::size_t n = 0;
  std::size_t degenerate = 0;
};

struct FeatureStats {
  FeatureSideStats reachable;
  FeatureSideStats unreachable;
};

FeatureStats FeatureStatsBySplit(const ScoreMatrix& matrix,
                                 std::span<const std::uint8_t> is_reachable,
                                 bool sample_variance = false);

// --- Composition probe -----------------------------------------------------

struct CompositionPattern {
  RelationId r1 = 0;
  RelationId r2 = 0;
  RelationId r3 = 0;
  friend auto operator<=>(const CompositionPattern&,
                          const CompositionPattern&) = default;
};

// Occurrences of (h1, r1, h2), (h1, r2, h3), (h3, r3, h2) in the train split
// with h3 distinct from h1 and h2; one count per (h1, h2, h3, r1, r2, r3).
std::map<CompositionPattern, std::size_t> MineCompositionPatterns(
    const KnowledgeGraph& kg, bool include_inverses = true);

struct CompositionProbeOptions {
  std::size_t min_count = 20;
  std::uint64_t seed = 0;
  // Random vectors per pattern; the closest relation is judged per draw.
  int draws = 1;
  // Multiplies the random vector; the outcome must not depend on it.
  double vector_scale = 1.0;
  bool include_inverses = true;
};

struct CompositionProbeResult {
  double accuracy = 0.0;
  double random_baseline = 0.0;
  std::size_t num_patterns = 0;
  std::size_t num_trials = 0;
  std::size_t num_correct = 0;
  std::size_t mined_patterns = 0;
  std::size_t mined_occurrences = 0;
};

// For every pattern seen at least min_count times, rotates a random unit
// complex vector v by r2 then r3 and checks whether r1 is the relation whose
// rotation of v lands closest (Euclidean). Candidates are all relations
// (base relations only when include_inverses is false).
CompositionProbeResult RotatECompositionProbe(
    const RotatEModel& model, const KnowledgeGraph& kg,
    const CompositionProbeOptions& options);

CompositionProbeResult RotatECompositionProbe(
    const RotatEModel& model,
    const std::map<CompositionPattern, std::size_t>& patterns,
    std::size_t num_candidates, const CompositionProbeOptions& options);

// --- Significance ------------------------------------------------------------

struct SignificanceResult {
  std::vector<double> mrr_a;
  std::vector<double> mrr_b;
  double t = 0.0;
};

// Splits the queries into k seeded folds and compares per-fold MRRs of two
// methods with a paired t-test.
SignificanceResult SignificanceRun(std::span<const double> ranks_a,
                                   std::span<const double> ranks_b, int k,
                                   std::uint64_t seed);

// --- Rendering ---------------------------------------------------------------

// Aligned table of MR / MRR / Hits@k per row, MRR and Hits in percent.
std::string RenderMetricsTable(
    std::span<const std::pair<std::string, MetricsReport>> rows);

std::string RenderSplitTable(std::span<const SplitReport> reports);

std::string SplitReportJson(const SplitReport& report);

}  // namespace kgcfuse

#endif  // KGCFUSE_ANALYSIS_HPP_
