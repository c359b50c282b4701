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

// Per-query score matrices: the hand-off format between frozen base models
// (in-repo or external) and the ensembling code.
//
// File layout (all integers and floats little-endian):
//   "KGCS" | u32 version = 1 | u8 normalized | u32 n_queries | u32 n_entities
//   | 32-byte manifest digest | u32 name length + UTF-8 model name
//   | n_queries * n_entities f32 scores, row-major.
// A sidecar "<file>.queries" lists the queries as "head_id<TAB>relation_id".

#ifndef KGCFUSE_SCORE_STORE_HPP_
#define KGCFUSE_SCORE_STORE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kgcfuse/digest.hpp"
#include "kgcfuse/kg.hpp"
#include "kgcfuse/models.hpp"

namespace kgcfuse {

inline constexpr std::uint32_t kScoreMatrixVersion = 1;

// Identifies a query list: every matrix combined in one ensemble must carry
// the same manifest digest.
struct QueryManifest {
  std::string dataset_id;
  Split split = Split::kTest;
  std::vector<Query> queries;
  Digest entity_checksum{};

  Digest ComputeDigest() const;
  std::string QueryLines() const;
};

// One query per triple of `split`, in split order.
QueryManifest MakeManifest(const KnowledgeGraph& kg, std::string dataset_id,
                           Split split);

std::vector<Query> ParseQueryLines(std::string_view text);

struct ScoreMatrix {
  std::string model_name;
  std::vector<Query> queries;
  std::size_t entity_count = 0;
  std::vector<float> scores;  // queries.size() x entity_count
  bool normalized = false;
  Digest manifest_digest{};

  std::size_t num_queries() const { return queries.size(); }
  std::span<const float> Row(std::size_t i) const {
    return {scores.data() + i * entity_count, entity_count};
  }
  std::span<float> Row(std::size_t i) {
    return {scores.data() + i * entity_count, entity_count};
  }
};

// Scores every manifest query with `model`. Rows are computed in parallel
// over `threads` workers; the result does not depend on the thread count.
ScoreMatrix ComputeScores(const Scorer& model, const QueryManifest& manifest,
                          std::string model_name, int threads = 1);

// ComputeScores + WriteScoreMatrix. Fails if the manifest was built against a
// different entity dictionary than `kg`'s.
ScoreMatrix ExportScores(const Scorer& model, const KnowledgeGraph& kg,
                         const QueryManifest& manifest, std::string model_name,
                         const std::filesystem::path& path, int threads = 1);

void WriteScoreMatrix(const ScoreMatrix& matrix,
                      const std::filesystem::path& path);

// Reads a matrix without manifest validation.
ScoreMatrix ReadScoreMatrix(const std::filesystem::path& path);

// Reads and checks the stored digest and shape against `manifest`.
ScoreMatrix ImportScores(const std::filesystem::path& path,
                         const QueryManifest& manifest);

// out[e] = (row[e] - min) / (max - min); a constant row maps to all zeros.
// Throws on non-finite input.
std::vector<double> MaxMinNormalize(std::span<const float> row);
std::vector<double> MaxMinNormalize(std::span<const double> row);

// Normalizes every row in place (f32) and sets the normalized flag.
void NormalizeRows(ScoreMatrix& matrix);

// Per-row min and max, used to normalize individual entries lazily.
struct RowRange {
  double min = 0.0;
  double max = 0.0;
  bool degenerate() const { return !(max > min); }
  double Normalize(double x) const {
    return degenerate() ? 0.0 : (x - min) / (max - min);
  }
};

RowRange ComputeRowRange(std::span<const float> row);

}  // namespace kgcfuse

#endif  // KGCFUSE_SCORE_STORE_HPP_
