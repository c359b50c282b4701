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

#include "kgcfuse/kg.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "kgcfuse/random.hpp"

namespace kgcfuse {

std::uint32_t Dictionary::GetOrAdd(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Dictionary::Find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string Dictionary::Dump() const {
  std::string out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += names_[i];
    out += '\n';
  }
  return out;
}

Dictionary Dictionary::FromDump(std::string_view text) {
  Dictionary dict;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{}
                                         : text.substr(eol + 1);
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      Fail(Error::Kind::kParse, "dictionary line " + std::to_string(line_no) +
                                    ": expected id<TAB>name");
    }
    const std::string id_text(line.substr(0, tab));
    if (id_text != std::to_string(dict.size())) {
      Fail(Error::Kind::kParse, "dictionary line " + std::to_string(line_no) +
                                    ": ids must be contiguous from 0");
    }
    dict.GetOrAdd(line.substr(tab + 1));
  }
  return dict;
}

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
    case Split::kHeldOut:
      return "heldout";
  }
  return "?";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "validation") return Split::kValid;
  if (name == "test") return Split::kTest;
  if (name == "heldout" || name == "held-out") return Split::kHeldOut;
  Fail(Error::Kind::kInvalidArgument, "unknown split '" + std::string(name) +
                                          "' (train|valid|test|heldout)");
}

Adjacency::Adjacency(std::size_t num_entities, std::span<const Triple> triples)
    : offsets_(num_entities + 1, 0) {
  for (const Triple& t : triples) ++offsets_[t.head + 1];
  for (std::size_t i = 1; i < offsets_.size(); ++i) {
    offsets_[i] += offsets_[i - 1];
  }
  edges_.resize(triples.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Triple& t : triples) {
    edges_[cursor[t.head]++] = {t.relation, t.tail};
  }
  for (std::size_t e = 0; e < num_entities; ++e) {
    std::sort(edges_.begin() + static_cast<std::ptrdiff_t>(offsets_[e]),
              edges_.begin() + static_cast<std::ptrdiff_t>(offsets_[e + 1]));
  }
}

RelationId KnowledgeGraph::Inverse(RelationId r) const {
  if (!has_inverses) {
    Fail(Error::Kind::kState, "graph has no inverse relations");
  }
  const auto base = static_cast<RelationId>(num_base_relations);
  Require(r < 2 * base, "relation id out of range");
  return r < base ? r + base : r - base;
}

namespace {

struct RawTriple {
  std::string head, relation, tail;
  std::size_t line;
};

std::vector<RawTriple> ReadTripleFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(Error::Kind::kIo, "cannot open " + path.string());
  std::vector<RawTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t a = line.find('\t');
    const std::size_t b =
        a == std::string::npos ? std::string::npos : line.find('\t', a + 1);
    if (a == std::string::npos || b == std::string::npos ||
        line.find('\t', b + 1) != std::string::npos) {
      const auto fields = std::count(line.begin(), line.end(), '\t') + 1;
      Fail(Error::Kind::kParse,
           path.string() + ":" + std::to_string(line_no) +
               ": expected 3 tab-separated fields, got " +
               std::to_string(fields));
    }
    out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1),
                   line.substr(b + 1), line_no});
  }
  return out;
}

}  // namespace

KnowledgeGraph LoadDataset(const std::filesystem::path& train_path,
                           const std::filesystem::path& valid_path,
                           const std::filesystem::path& test_path,
                           const LoadOptions& options) {
  KnowledgeGraph kg;
  const std::pair<Split, const std::filesystem::path*> files[] = {
      {Split::kTrain, &train_path},
      {Split::kValid, &valid_path},
      {Split::kTest, &test_path}};

  std::unordered_set<Triple, TripleHash> seen_any;
  for (const auto& [split, path] : files) {
    const std::vector<RawTriple> raw = ReadTripleFile(*path);
    std::unordered_set<Triple, TripleHash> seen_here;
    for (const RawTriple& r : raw) {
      if (split != Split::kTrain) {
        if (!kg.entities.Find(r.head)) {
          kg.load_report.unseen.push_back({split, r.line, r.head, false});
        }
        if (!kg.entities.Find(r.tail) && r.tail != r.head) {
          kg.load_report.unseen.push_back({split, r.line, r.tail, false});
        }
        if (!kg.relations.Find(r.relation)) {
          kg.load_report.unseen.push_back({split, r.line, r.relation, true});
        }
      }
      if (r.relation.ends_with(options.inverse_suffix) &&
          !options.inverse_suffix.empty()) {
        Fail(Error::Kind::kParse,
             path->string() + ":" + std::to_string(r.line) + ": relation '" +
                 r.relation + "' uses the reserved inverse suffix '" +
                 options.inverse_suffix + "'");
      }
      const Triple t{kg.entities.GetOrAdd(r.head),
                     kg.relations.GetOrAdd(r.relation),
                     kg.entities.GetOrAdd(r.tail)};
      if (!seen_here.insert(t).second) {
        ++kg.load_report.duplicates[static_cast<int>(split)];
        continue;
      }
      if (!seen_any.insert(t).second) {
        ++kg.load_report.cross_split_overlaps;
        continue;
      }
      kg.split(split).push_back(t);
    }
  }
  kg.num_base_relations = kg.relations.size();
  kg.adjacency = Adjacency(kg.num_entities(), kg.split(Split::kTrain));
  return kg;
}

KnowledgeGraph HoldOutTrain(KnowledgeGraph kg, double fraction,
                            std::uint64_t seed) {
  Require(!kg.has_inverses, "hold out train triples before adding inverses");
  Require(fraction > 0.0 && fraction < 1.0, "held-out fraction must be in (0,1)");
  std::vector<Triple>& train = kg.split(Split::kTrain);
  const auto count = static_cast<std::size_t>(
      static_cast<double>(train.size()) * fraction + 0.5);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);
  std::vector<std::uint8_t> held(train.size(), 0);
  for (std::size_t i = 0; i < count; ++i) held[order[i]] = 1;
  std::vector<Triple> kept;
  std::vector<Triple>& out = kg.split(Split::kHeldOut);
  for (std::size_t i = 0; i < train.size(); ++i) {
    (held[i] ? out : kept).push_back(train[i]);
  }
  train = std::move(kept);
  kg.adjacency = Adjacency(kg.num_entities(), train);
  return kg;
}

KnowledgeGraph AugmentInverses(KnowledgeGraph kg, const LoadOptions& options) {
  if (kg.has_inverses) {
    Fail(Error::Kind::kState, "inverse relations were already added");
  }
  const std::size_t base = kg.relations.size();
  for (std::size_t r = 0; r < base; ++r) {
    const std::string name =
        kg.relations.Name(static_cast<std::uint32_t>(r)) + options.inverse_suffix;
    kg.relations.GetOrAdd(name);
  }
  if (kg.relations.size() != 2 * base) {
    Fail(Error::Kind::kState, "inverse relation names collide with existing names");
  }
  kg.num_base_relations = base;
  kg.has_inverses = true;
  for (auto& split : kg.splits) {
    const std::size_t n = split.size();
    split.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Triple t = split[i];
      split.push_back({t.tail, static_cast<RelationId>(t.relation + base), t.head});
    }
  }
  kg.adjacency = Adjacency(kg.num_entities(), kg.split(Split::kTrain));
  return kg;
}

void FilterIndex::Add(const Triple& t) {
  sets_[Key(t.head, t.relation)].push_back(t.tail);
}

void FilterIndex::Finalize() {
  for (auto& [key, tails] : sets_) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
  }
}

std::span<const EntityId> FilterIndex::Tails(EntityId head,
                                             RelationId relation) const {
  auto it = sets_.find(Key(head, relation));
  if (it == sets_.end()) return {};
  return it->second;
}

bool FilterIndex::Contains(const Triple& t) const {
  const auto tails = Tails(t.head, t.relation);
  return std::binary_search(tails.begin(), tails.end(), t.tail);
}

FilterIndex BuildFilterIndex(const KnowledgeGraph& kg,
                             std::span<const Split> splits) {
  FilterIndex index;
  for (Split s : splits) {
    for (const Triple& t : kg.split(s)) index.Add(t);
  }
  index.Finalize();
  return index;
}

FilterIndex BuildFilterIndex(const KnowledgeGraph& kg) {
  if (!kg.has_inverses) {
    Fail(Error::Kind::kState, "build the filter index after adding inverses");
  }
  static constexpr Split kAll[] = {Split::kTrain, Split::kValid, Split::kTest,
                                   Split::kHeldOut};
  return BuildFilterIndex(kg, kAll);
}

Adjacency ReachabilityGraph(const KnowledgeGraph& kg,
                            const ReachabilityConfig& config) {
  std::vector<Triple> edges;
  auto take = [&](Split s) {
    for (const Triple& t : kg.split(s)) {
      if (!config.use_inverse_edges && kg.IsInverse(t.relation)) continue;
      edges.push_back(t);
    }
  };
  take(Split::kTrain);
  if (config.graph_source == GraphSource::kTrainValid) take(Split::kValid);
  return Adjacency(kg.num_entities(), edges);
}

namespace {

// Marks every entity reachable from `from` by a walk of 1..max_hops edges.
// `stamp` is a per-entity scratch array; entries equal to `mark` are reached.
void MarkReachable(const Adjacency& graph, EntityId from, int max_hops,
                   std::vector<std::uint32_t>& stamp, std::uint32_t mark,
                   std::vector<EntityId>& frontier,
                   std::vector<EntityId>& next) {
  frontier.assign(1, from);
  for (int hop = 0; hop < max_hops && !frontier.empty(); ++hop) {
    next.clear();
    for (EntityId u : frontier) {
      for (const auto& edge : graph.Neighbors(u)) {
        if (stamp[edge.target] != mark) {
          stamp[edge.target] = mark;
          next.push_back(edge.target);
        }
      }
    }
    frontier.swap(next);
  }
}

}  // namespace

bool ReachableWithin(const Adjacency& graph, EntityId from, EntityId to,
                     int max_hops) {
  Require(max_hops >= 1, "max_path_length must be >= 1");
  if (from >= graph.num_entities() || to >= graph.num_entities()) return false;
  std::vector<std::uint32_t> stamp(graph.num_entities(), 0);
  std::vector<EntityId> frontier, next;
  MarkReachable(graph, from, max_hops, stamp, 1, frontier, next);
  return stamp[to] == 1;
}

std::vector<std::uint8_t> ReachabilityMask(const Adjacency& graph,
                                           std::span<const Triple> triples,
                                           int max_hops) {
  Require(max_hops >= 1, "max_path_length must be >= 1");
  std::vector<std::uint8_t> mask(triples.size(), 0);
  // Group by head so each BFS runs once.
  std::map<EntityId, std::vector<std::size_t>> by_head;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    by_head[triples[i].head].push_back(i);
  }
  std::vector<std::uint32_t> stamp(graph.num_entities(), 0);
  std::vector<EntityId> frontier, next;
  std::uint32_t mark = 0;
  for (const auto& [head, indices] : by_head) {
    if (head >= graph.num_entities()) continue;
    ++mark;
    MarkReachable(graph, head, max_hops, stamp, mark, frontier, next);
    for (std::size_t i : indices) {
      const EntityId tail = triples[i].tail;
      mask[i] = tail < graph.num_entities() && stamp[tail] == mark;
    }
  }
  return mask;
}

ReachabilitySplit ComputeReachabilitySplit(const KnowledgeGraph& kg,
                                           const ReachabilityConfig& config) {
  Require(config.max_path_length >= 1, "max_path_length must be >= 1");
  const Adjacency graph = ReachabilityGraph(kg, config);
  const auto& test = kg.split(Split::kTest);
  ReachabilitySplit out;
  out.is_reachable = ReachabilityMask(graph, test, config.max_path_length);
  for (std::size_t i = 0; i < test.size(); ++i) {
    (out.is_reachable[i] ? out.reachable : out.unreachable).push_back(test[i]);
  }
  return out;
}

}  // namespace kgcfuse
