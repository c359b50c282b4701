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

// Experiment configuration: a flat "key = value" file grouped in [sections].
//
//   # comment
//   [dataset]
//   dir = data/wn18rr
//   [model.rotate]
//   kind = rotate
//   dim = 256
//
// Values are kept as strings and converted on access.

#ifndef KGCFUSE_CONFIG_HPP_
#define KGCFUSE_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kgcfuse {

class Config {
 public:
  static Config Parse(std::string_view text, const std::string& source = "config");
  static Config Load(const std::filesystem::path& path);

  void Set(const std::string& section, const std::string& key, std::string value);
  // "section.key=value"; the section may itself contain dots.
  void SetAssignment(std::string_view assignment);

  bool Has(const std::string& section, const std::string& key) const;
  std::optional<std::string> Get(const std::string& section,
                                 const std::string& key) const;

  std::string GetString(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
  std::int64_t GetInt(const std::string& section, const std::string& key,
                      std::int64_t fallback) const;
  double GetDouble(const std::string& section, const std::string& key,
                   double fallback) const;
  bool GetBool(const std::string& section, const std::string& key,
               bool fallback) const;
  // Comma-separated list, entries trimmed, empty entries dropped.
  std::vector<std::string> GetList(const std::string& section,
                                   const std::string& key) const;
  std::vector<double> GetDoubleList(const std::string& section,
                                    const std::string& key) const;

  // Names after "prefix." of every section starting with it, sorted.
  std::vector<std::string> SectionsWithPrefix(const std::string& prefix) const;
  bool HasSection(const std::string& section) const {
    return values_.contains(section);
  }

  // Rejects sections and keys outside the known schema.
  void CheckSchema() const;

  // Sections and keys in sorted order, one "key = value" per line.
  std::string Canonical() const;
  // First 12 hex digits of the SHA-256 of Canonical() without the runtime-only
  // keys (run.threads, run.out).
  std::string Hash() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace kgcfuse

#endif  // KGCFUSE_CONFIG_HPP_
