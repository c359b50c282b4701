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

// Knowledge graph loading, inverse augmentation, filter sets and the
// reachable/unreachable partition of the test split.

#ifndef KGCFUSE_KG_HPP_
#define KGCFUSE_KG_HPP_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgcfuse/common.hpp"
#include "kgcfuse/digest.hpp"

namespace kgcfuse {

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t x = (std::uint64_t{t.head} << 32) ^ t.tail;
    x ^= std::uint64_t{t.relation} * 0x9E3779B97F4A7C15ULL;
    x ^= x >> 29;
    return static_cast<std::size_t>(x * 0xBF58476D1CE4E5B9ULL);
  }
};

// A (head, relation, ?) query. Tail queries (?, r, t) are represented as
// (t, r^-1, ?) once inverses are added.
struct Query {
  EntityId head = 0;
  RelationId relation = 0;

  friend auto operator<=>(const Query&, const Query&) = default;
};

// Ordered name -> dense id mapping, ids contiguous from 0.
class Dictionary {
 public:
  std::uint32_t GetOrAdd(std::string_view name);
  std::optional<std::uint32_t> Find(std::string_view name) const;
  const std::string& Name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  // "id<TAB>name" lines in id order.
  std::string Dump() const;
  Digest Checksum() const { return Sha256(Dump()); }

  static Dictionary FromDump(std::string_view text);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

enum class Split : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2, kHeldOut = 3 };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

// Compressed adjacency: outgoing (relation, neighbor) edges per entity.
class Adjacency {
 public:
  struct Edge {
    RelationId relation;
    EntityId target;
    friend auto operator<=>(const Edge&, const Edge&) = default;
  };

  Adjacency() = default;
  Adjacency(std::size_t num_entities, std::span<const Triple> triples);

  std::span<const Edge> Neighbors(EntityId e) const {
    if (e + 1 >= offsets_.size()) return {};
    return {edges_.data() + offsets_[e], edges_.data() + offsets_[e + 1]};
  }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_entities() const {
    return offsets_.empty() ? 0 : offsets_.size() - 1;
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
};

// Valid/test entries whose entity or relation never occurred in train.
struct UnseenEntry {
  Split split;
  std::size_t line;
  std::string name;
  bool is_relation;
};

struct LoadReport {
  std::vector<UnseenEntry> unseen;
  // Lines dropped per split because an identical triple was already present.
  std::size_t duplicates[4] = {0, 0, 0, 0};
  // Valid/test triples dropped because they also occur in an earlier split.
  std::size_t cross_split_overlaps = 0;
};

struct KnowledgeGraph {
  Dictionary entities;
  Dictionary relations;
  std::vector<Triple> splits[4];
  Adjacency adjacency;
  LoadReport load_report;

  bool has_inverses = false;
  // Relation count before augmentation; relations [base, 2*base) are the
  // inverses of [0, base).
  std::size_t num_base_relations = 0;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  const std::vector<Triple>& split(Split s) const {
    return splits[static_cast<int>(s)];
  }
  std::vector<Triple>& split(Split s) { return splits[static_cast<int>(s)]; }

  RelationId Inverse(RelationId r) const;
  bool IsInverse(RelationId r) const {
    return has_inverses && r >= num_base_relations;
  }
};

struct LoadOptions {
  std::string inverse_suffix = "_inv";
};

// Reads the three tab-separated files. Dictionaries are filled from train
// first, then valid, then test. Each split is a set in first-appearance order.
KnowledgeGraph LoadDataset(const std::filesystem::path& train_path,
                           const std::filesystem::path& valid_path,
                           const std::filesystem::path& test_path,
                           const LoadOptions& options = {});

// Moves a random `fraction` of the train triples into the held-out split.
// Must run before AugmentInverses so a triple and its inverse stay together.
KnowledgeGraph HoldOutTrain(KnowledgeGraph kg, double fraction,
                            std::uint64_t seed);

// Appends (t, r^-1, h) for every (h, r, t) of every split and rebuilds the
// adjacency over train. Fails when called on an already augmented graph.
KnowledgeGraph AugmentInverses(KnowledgeGraph kg,
                               const LoadOptions& options = {});

inline Triple InverseTriple(const KnowledgeGraph& kg, const Triple& t) {
  return {t.tail, kg.Inverse(t.relation), t.head};
}

// Known-true tails keyed by (head, relation).
class FilterIndex {
 public:
  FilterIndex() = default;

  void Add(const Triple& t);
  // Sorts and deduplicates; call once after the last Add.
  void Finalize();

  std::span<const EntityId> Tails(EntityId head, RelationId relation) const;
  bool Contains(const Triple& t) const;
  bool HasKey(EntityId head, RelationId relation) const {
    return sets_.contains(Key(head, relation));
  }
  std::size_t num_keys() const { return sets_.size(); }

 private:
  static std::uint64_t Key(EntityId h, RelationId r) {
    return (std::uint64_t{h} << 32) | r;
  }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> sets_;
};

// Filter over train, valid, test and held-out. Requires inverse augmentation.
FilterIndex BuildFilterIndex(const KnowledgeGraph& kg);

// Filter over the given splits only (e.g. train answers for routing).
FilterIndex BuildFilterIndex(const KnowledgeGraph& kg,
                             std::span<const Split> splits);

enum class GraphSource : std::uint8_t { kTrain = 0, kTrainValid = 1 };

struct ReachabilityConfig {
  int max_path_length = 2;
  GraphSource graph_source = GraphSource::kTrain;
  // Traverse inverse edges as well (only meaningful after augmentation).
  bool use_inverse_edges = true;
};

struct ReachabilitySplit {
  // Per test-triple flag, aligned with kg.split(Split::kTest).
  std::vector<std::uint8_t> is_reachable;
  std::vector<Triple> reachable;
  std::vector<Triple> unreachable;
};

// The edge set a reachability query walks over.
Adjacency ReachabilityGraph(const KnowledgeGraph& kg,
                            const ReachabilityConfig& config);

// True iff a walk of 1..max_hops edges leads from `from` to `to`.
bool ReachableWithin(const Adjacency& graph, EntityId from, EntityId to,
                     int max_hops);

ReachabilitySplit ComputeReachabilitySplit(const KnowledgeGraph& kg,
                                           const ReachabilityConfig& config);

// Per-triple reachability flags for an arbitrary query list.
std::vector<std::uint8_t> ReachabilityMask(const Adjacency& graph,
                                           std::span<const Triple> triples,
                                           int max_hops);

}  // namespace kgcfuse

#endif  // KGCFUSE_KG_HPP_
