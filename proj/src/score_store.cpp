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

#include "kgcfuse/score_store.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "kgcfuse/binary_io.hpp"

namespace kgcfuse {

Digest QueryManifest::ComputeDigest() const {
  std::string text = dataset_id;
  text += '\n';
  text += SplitName(split);
  text += '\n';
  text += ToHex(entity_checksum);
  text += '\n';
  text += QueryLines();
  return Sha256(text);
}

std::string QueryManifest::QueryLines() const {
  std::string out;
  out.reserve(queries.size() * 12);
  for (const Query& q : queries) {
    out += std::to_string(q.head);
    out += '\t';
    out += std::to_string(q.relation);
    out += '\n';
  }
  return out;
}

QueryManifest MakeManifest(const KnowledgeGraph& kg, std::string dataset_id,
                           Split split) {
  QueryManifest m;
  m.dataset_id = std::move(dataset_id);
  m.split = split;
  m.entity_checksum = kg.entities.Checksum();
  for (const Triple& t : kg.split(split)) m.queries.push_back({t.head, t.relation});
  return m;
}

std::vector<Query> ParseQueryLines(std::string_view text) {
  std::vector<Query> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Query q;
    char tab = 0;
    if (!(fields >> q.head) || !fields.get(tab) || tab != '\t' ||
        !(fields >> q.relation)) {
      Fail(Error::Kind::kParse, "query line " + std::to_string(line_no) +
                                    ": expected head_id<TAB>relation_id");
    }
    out.push_back(q);
  }
  return out;
}

ScoreMatrix ComputeScores(const Scorer& model, const QueryManifest& manifest,
                          std::string model_name, int threads) {
  ScoreMatrix m;
  m.model_name = std::move(model_name);
  m.queries = manifest.queries;
  m.entity_count = model.num_entities();
  m.manifest_digest = manifest.ComputeDigest();
  m.scores.resize(m.queries.size() * m.entity_count);
  const std::size_t n = m.queries.size();
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) model.ScoreAll(m.queries[i], m.Row(i));
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return m;
}

ScoreMatrix ExportScores(const Scorer& model, const KnowledgeGraph& kg,
                         const QueryManifest& manifest, std::string model_name,
                         const std::filesystem::path& path, int threads) {
  if (manifest.entity_checksum != kg.entities.Checksum()) {
    Fail(Error::Kind::kChecksum,
         "manifest entity-dictionary checksum does not match the graph");
  }
  if (model.num_entities() != kg.num_entities()) {
    Fail(Error::Kind::kChecksum, "model entity count does not match the graph");
  }
  ScoreMatrix m = ComputeScores(model, manifest, std::move(model_name), threads);
  WriteScoreMatrix(m, path);
  return m;
}

void WriteScoreMatrix(const ScoreMatrix& matrix,
                      const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) Fail(Error::Kind::kIo, "cannot write " + path.string());
    out.write("KGCS", 4);
    binary::Write<std::uint32_t>(out, kScoreMatrixVersion);
    binary::Write<std::uint8_t>(out, matrix.normalized ? 1 : 0);
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.num_queries()));
    binary::Write<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.entity_count));
    binary::WriteBytes(out, matrix.manifest_digest);
    binary::WriteString(out, matrix.model_name);
    binary::WriteSpan<float>(out, matrix.scores);
    if (!out) Fail(Error::Kind::kIo, "write failed for " + path.string());
  }
  std::ofstream side(path.string() + ".queries", std::ios::binary | std::ios::trunc);
  if (!side) Fail(Error::Kind::kIo, "cannot write " + path.string() + ".queries");
  QueryManifest lines;
  lines.queries = matrix.queries;
  side << lines.QueryLines();
}

ScoreMatrix ReadScoreMatrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(Error::Kind::kIo, "cannot open " + path.string());
  binary::ExpectMagic(in, "KGCS", "score matrix");
  const auto version = binary::Read<std::uint32_t>(in, "version");
  if (version != kScoreMatrixVersion) {
    Fail(Error::Kind::kFormat,
         "unsupported score matrix version " + std::to_string(version));
  }
  ScoreMatrix m;
  m.normalized = binary::Read<std::uint8_t>(in, "normalized flag") != 0;
  const auto n_queries = binary::Read<std::uint32_t>(in, "query count");
  m.entity_count = binary::Read<std::uint32_t>(in, "entity count");
  for (auto& b : m.manifest_digest) b = binary::Read<std::uint8_t>(in, "manifest digest");
  m.model_name = binary::ReadString(in, "model name");
  m.scores.resize(std::size_t{n_queries} * m.entity_count);
  for (std::size_t row = 0; row < n_queries; ++row) {
    if (!binary::ReadSpan<float>(in, m.Row(row))) {
      Fail(Error::Kind::kFormat, "truncated payload at row " + std::to_string(row));
    }
  }

  const std::string side_path = path.string() + ".queries";
  std::ifstream side(side_path, std::ios::binary);
  if (side) {
    std::stringstream text;
    text << side.rdbuf();
    m.queries = ParseQueryLines(text.str());
    if (m.queries.size() != n_queries) {
      Fail(Error::Kind::kFormat, side_path + " lists " +
                                     std::to_string(m.queries.size()) +
                                     " queries, matrix has " +
                                     std::to_string(n_queries));
    }
  } else {
    m.queries.resize(n_queries);
  }
  return m;
}

ScoreMatrix ImportScores(const std::filesystem::path& path,
                         const QueryManifest& manifest) {
  ScoreMatrix m = ReadScoreMatrix(path);
  if (m.manifest_digest != manifest.ComputeDigest()) {
    Fail(Error::Kind::kChecksum, "manifest checksum mismatch for " + path.string() +
                                     " (scores were exported for a different "
                                     "dataset, split or query list)");
  }
  if (m.num_queries() != manifest.queries.size()) {
    Fail(Error::Kind::kChecksum, "query count mismatch for " + path.string());
  }
  // The digest covers the query list, so the sidecar is optional.
  m.queries = manifest.queries;
  return m;
}

namespace {

template <typename T>
std::vector<double> NormalizeImpl(std::span<const T> row) {
  double lo = INFINITY;
  double hi = -INFINITY;
  for (T x : row) {
    if (!std::isfinite(x)) {
      Fail(Error::Kind::kNumerical, "cannot normalize a row with non-finite scores");
    }
    lo = std::min<double>(lo, x);
    hi = std::max<double>(hi, x);
  }
  std::vector<double> out(row.size(), 0.0);
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < row.size(); ++i) {
    out[i] = (static_cast<double>(row[i]) - lo) / range;
  }
  return out;
}

}  // namespace

std::vector<double> MaxMinNormalize(std::span<const float> row) {
  return NormalizeImpl(row);
}

std::vector<double> MaxMinNormalize(std::span<const double> row) {
  return NormalizeImpl(row);
}

void NormalizeRows(ScoreMatrix& matrix) {
  for (std::size_t i = 0; i < matrix.num_queries(); ++i) {
    auto row = matrix.Row(i);
    const std::vector<double> normalized = MaxMinNormalize(std::span<const float>(row));
    for (std::size_t e = 0; e < row.size(); ++e) {
      row[e] = static_cast<float>(normalized[e]);
    }
  }
  matrix.normalized = true;
}

RowRange ComputeRowRange(std::span<const float> row) {
  RowRange r{INFINITY, -INFINITY};
  for (float x : row) {
    if (!std::isfinite(x)) {
      Fail(Error::Kind::kNumerical, "cannot normalize a row with non-finite scores");
    }
    r.min = std::min<double>(r.min, x);
    r.max = std::max<double>(r.max, x);
  }
  return r;
}

}  // namespace kgcfuse
