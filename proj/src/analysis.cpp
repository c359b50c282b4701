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

#include "kgcfuse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <unordered_map>

#include <json.hpp>

#include "kgcfuse/dynasemble.hpp"
#include "kgcfuse/random.hpp"

namespace kgcfuse {

namespace {

MetricsReport AggregateOrEmpty(const std::vector<double>& ranks) {
  if (ranks.empty()) return {};
  return AggregateRanks(ranks);
}

}  // namespace

SplitReport EvaluateBySplit(std::string method, std::span<const double> ranks,
                            std::span<const std::uint8_t> is_reachable) {
  Require(ranks.size() == is_reachable.size(),
          "ranks and reachability flags differ in length");
  SplitReport report;
  report.method = std::move(method);
  std::vector<double> reach, unreach;
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    (is_reachable[q] ? reach : unreach).push_back(ranks[q]);
  }
  report.all = AggregateOrEmpty({ranks.begin(), ranks.end()});
  report.reachable = AggregateOrEmpty(reach);
  report.unreachable = AggregateOrEmpty(unreach);
  return report;
}

void CountDegenerateRows(const ScoreMatrix& matrix,
                         std::span<const std::uint8_t> is_reachable,
                         SplitReport& report) {
  Require(matrix.num_queries() == is_reachable.size(),
          "matrix rows and reachability flags differ in length");
  report.degenerate_reachable = 0;
  report.degenerate_unreachable = 0;
  for (std::size_t q = 0; q < matrix.num_queries(); ++q) {
    if (!ComputeRowRange(matrix.Row(q)).degenerate()) continue;
    ++(is_reachable[q] ? report.degenerate_reachable : report.degenerate_unreachable);
  }
}

MeanStd ComputeMeanStd(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

WeightStats WeightStatsBySplit(std::span<const std::vector<double>> weights,
                               std::size_t model,
                               std::span<const std::uint8_t> is_reachable) {
  Require(weights.size() == is_reachable.size(),
          "weights and reachability flags differ in length");
  std::vector<double> reach, unreach;
  for (std::size_t q = 0; q < weights.size(); ++q) {
    Require(model < weights[q].size(), "model index out of range");
    (is_reachable[q] ? reach : unreach).push_back(weights[q][model]);
  }
  return {ComputeMeanStd(reach), ComputeMeanStd(unreach)};
}

FeatureStats FeatureStatsBySplit(const ScoreMatrix& matrix,
                                 std::span<const std::uint8_t> is_reachable,
                                 bool sample_variance) {
  Require(matrix.num_queries() == is_reachable.size(),
          "matrix rows and reachability flags differ in length");
  FeatureStats out;
  for (std::size_t q = 0; q < matrix.num_queries(); ++q) {
    FeatureSideStats& side = is_reachable[q] ? out.reachable : out.unreachable;
    const auto row = MaxMinNormalize(matrix.Row(q));
    const auto [mean, var] = ExtractFeatures(row, sample_variance);
    side.mean_of_means += mean;
    side.mean_of_variances += var;
    if (ComputeRowRange(matrix.Row(q)).degenerate()) ++side.degenerate;
    ++side.n;
  }
  for (FeatureSideStats* side : {&out.reachable, &out.unreachable}) {
    if (side->n == 0) continue;
    side->mean_of_means /= static_cast<double>(side->n);
    side->mean_of_variances /= static_cast<double>(side->n);
  }
  return out;
}

// --- Composition probe -------------------------------------------------------

std::map<CompositionPattern, std::size_t> MineCompositionPatterns(
    const KnowledgeGraph& kg, bool include_inverses) {
  const std::size_t n = kg.num_entities();
  std::vector<std::vector<Adjacency::Edge>> out(n);
  for (const Triple& t : kg.split(Split::kTrain)) {
    if (!include_inverses && kg.IsInverse(t.relation)) continue;
    out[t.head].push_back({t.relation, t.tail});
  }
  std::map<CompositionPattern, std::size_t> counts;
  std::unordered_map<EntityId, std::vector<RelationId>> direct;
  for (EntityId h1 = 0; h1 < n; ++h1) {
    if (out[h1].empty()) continue;
    direct.clear();
    for (const auto& e : out[h1]) direct[e.target].push_back(e.relation);
    for (const auto& [r2, h3] : out[h1]) {
      if (h3 == h1) continue;
      for (const auto& [r3, h2] : out[h3]) {
        if (h2 == h3) continue;
        const auto it = direct.find(h2);
        if (it == direct.end()) continue;
        for (RelationId r1 : it->second) ++counts[{r1, r2, r3}];
      }
    }
  }
  return counts;
}

namespace {

double Gaussian(Rng& rng) {
  const double u1 = rng.Uniform01();
  const double u2 = rng.Uniform01();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

CompositionProbeResult RotatECompositionProbe(
    const RotatEModel& model,
    const std::map<CompositionPattern, std::size_t>& patterns,
    std::size_t num_candidates, const CompositionProbeOptions& options) {
  Require(num_candidates > 0 && num_candidates <= model.relations,
          "candidate relation count out of range");
  Require(options.draws >= 1, "need at least one draw per pattern");
  CompositionProbeResult result;
  result.random_baseline = 1.0 / static_cast<double>(num_candidates);
  result.mined_patterns = patterns.size();
  for (const auto& [p, c] : patterns) result.mined_occurrences += c;

  const std::size_t d = model.dim;
  auto phases = [&](RelationId r) { return model.relation_phases.data() + r * d; };
  Rng rng(options.seed);
  std::vector<double> v_re(d), v_im(d), t_re(d), t_im(d);
  for (const auto& [pattern, count] : patterns) {
    if (count < options.min_count) continue;
    Require(pattern.r1 < model.relations && pattern.r2 < model.relations &&
                pattern.r3 < model.relations,
            "pattern relation outside the model");
    ++result.num_patterns;
    for (int draw = 0; draw < options.draws; ++draw) {
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        v_re[i] = Gaussian(rng);
        v_im[i] = Gaussian(rng);
        norm += v_re[i] * v_re[i] + v_im[i] * v_im[i];
      }
      const double scale = options.vector_scale / std::sqrt(norm);
      for (std::size_t i = 0; i < d; ++i) {
        v_re[i] *= scale;
        v_im[i] *= scale;
      }
      // Target: v rotated by r2, then by r3.
      const float* p2 = phases(pattern.r2);
      const float* p3 = phases(pattern.r3);
      for (std::size_t i = 0; i < d; ++i) {
        const double c2 = std::cos(p2[i]), s2 = std::sin(p2[i]);
        const double a_re = v_re[i] * c2 - v_im[i] * s2;
        const double a_im = v_re[i] * s2 + v_im[i] * c2;
        const double c3 = std::cos(p3[i]), s3 = std::sin(p3[i]);
        t_re[i] = a_re * c3 - a_im * s3;
        t_im[i] = a_re * s3 + a_im * c3;
      }
      RelationId best = 0;
      double best_dist = INFINITY;
      for (RelationId r = 0; r < num_candidates; ++r) {
        const float* pr = phases(r);
        double dist = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double c = std::cos(pr[i]), s = std::sin(pr[i]);
          const double re = v_re[i] * c - v_im[i] * s - t_re[i];
          const double im = v_re[i] * s + v_im[i] * c - t_im[i];
          dist += re * re + im * im;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = r;
        }
      }
      ++result.num_trials;
      if (best == pattern.r1) ++result.num_correct;
    }
  }
  if (result.num_patterns == 0) {
    Fail(Error::Kind::kDegenerate,
         "no composition pattern occurs at least " + std::to_string(options.min_count) +
             " times (mined " + std::to_string(result.mined_patterns) +
             " distinct patterns, " + std::to_string(result.mined_occurrences) +
             " occurrences)");
  }
  result.accuracy =
      static_cast<double>(result.num_correct) / static_cast<double>(result.num_trials);
  return result;
}

CompositionProbeResult RotatECompositionProbe(
    const RotatEModel& model, const KnowledgeGraph& kg,
    const CompositionProbeOptions& options) {
  Require(kg.has_inverses, "composition probe expects an inverse-augmented graph");
  const auto patterns = MineCompositionPatterns(kg, options.include_inverses);
  const std::size_t candidates =
      options.include_inverses ? kg.num_relations() : kg.num_base_relations;
  return RotatECompositionProbe(model, patterns, candidates, options);
}

// --- Significance --------------------------------------------------------------

SignificanceResult SignificanceRun(std::span<const double> ranks_a,
                                   std::span<const double> ranks_b, int k,
                                   std::uint64_t seed) {
  Require(ranks_a.size() == ranks_b.size(), "methods rank different query counts");
  Require(k >= 2 && static_cast<std::size_t>(k) <= ranks_a.size(),
          "need 2 <= k <= number of queries");
  SignificanceResult out;
  for (const auto& fold : KFoldSplit(ranks_a.size(), k, seed)) {
    std::vector<double> a, b;
    for (std::size_t i : fold) {
      a.push_back(ranks_a[i]);
      b.push_back(ranks_b[i]);
    }
    out.mrr_a.push_back(AggregateRanks(a).mrr);
    out.mrr_b.push_back(AggregateRanks(b).mrr);
  }
  out.t = PairedTTest(out.mrr_a, out.mrr_b);
  return out;
}

// --- Rendering -------------------------------------------------------------------

namespace {

std::string MetricsCells(const MetricsReport& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%10.1f %7.1f %7.1f %7.1f %7.1f %7zu", m.mr,
                100.0 * m.mrr, 100.0 * m.hits[0], 100.0 * m.hits[1],
                100.0 * m.hits[2], m.n_queries);
  return buf;
}

std::size_t NameWidth(std::span<const std::string> names) {
  std::size_t w = 6;
  for (const auto& n : names) w = std::max(w, n.size());
  return w;
}

std::string Pad(const std::string& s, std::size_t w) {
  return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
}

}  // namespace

std::string RenderMetricsTable(
    std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.first);
  const std::size_t w = NameWidth(names);
  std::string out = Pad("method", w) +
                    "         MR     MRR  Hits@1  Hits@3 Hits@10       n\n";
  for (const auto& [name, m] : rows) out += Pad(name, w) + " " + MetricsCells(m) + "\n";
  return out;
}

std::string RenderSplitTable(std::span<const SplitReport> reports) {
  std::vector<std::string> names;
  for (const auto& r : reports) names.push_back(r.method);
  const std::size_t w = NameWidth(names);
  std::string out;
  for (const char* side : {"reachable", "unreachable"}) {
    out += std::string(side) + " split\n";
    out += Pad("method", w) +
           "         MR     MRR  Hits@1  Hits@3 Hits@10       n  constant-rows\n";
    for (const auto& r : reports) {
      const bool reach = side[0] == 'r';
      char deg[32];
      std::snprintf(deg, sizeof(deg), " %14zu",
                    reach ? r.degenerate_reachable : r.degenerate_unreachable);
      out += Pad(r.method, w) + " " + MetricsCells(reach ? r.reachable : r.unreachable) +
             deg + "\n";
    }
    out += "\n";
  }
  return out;
}

std::string SplitReportJson(const SplitReport& report) {
  nlohmann::ordered_json j;
  j["method"] = report.method;
  j["all"] = nlohmann::ordered_json::parse(report.all.ToJson());
  j["reachable"] = nlohmann::ordered_json::parse(report.reachable.ToJson());
  j["unreachable"] = nlohmann::ordered_json::parse(report.unreachable.ToJson());
  j["constant_rows_reachable"] = report.degenerate_reachable;
  j["constant_rows_unreachable"] = report.degenerate_unreachable;
  return j.dump(2);
}

}  // namespace kgcfuse
