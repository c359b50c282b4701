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

#include "kgcfuse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "kgcfuse/common.hpp"
#include "kgcfuse/digest.hpp"

namespace kgcfuse {

namespace {

std::string Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

[[noreturn]] void BadValue(const std::string& section, const std::string& key,
                           const std::string& value, const char* expected) {
  Fail(Error::Kind::kParse, section + "." + key + " = '" + value + "': expected " +
                                expected);
}

const std::map<std::string, std::set<std::string>>& Schema() {
  static const auto* schema = new std::map<std::string, std::set<std::string>>{
      {"run", {"seed", "threads", "out"}},
      {"dataset", {"id", "dir", "inverse_suffix", "heldout_fraction"}},
      {"reachability", {"max_path_length", "graph", "inverse_edges"}},
      {"model", {"kind", "dim", "epochs", "batch_size", "negatives", "lr", "seed",
                 "adversarial_temperature", "gamma", "regularization", "hop_weights",
                 "saturation"}},
      {"import", {"train", "valid", "test", "heldout"}},
      {"ensemble", {"models", "anchor", "variant", "sample_variance", "margin",
                    "train_split", "lr", "negatives", "epochs", "hidden", "init_low",
                    "init_high", "loss", "exclude_filtered", "seed"}},
      {"static", {"grid"}},
      {"eval", {"tie", "structural", "textual", "rerank_top_k"}},
      {"analysis", {"weight_model", "probe_min_count", "probe_draws",
                    "probe_include_inverses"}},
      {"significance", {"folds", "seed"}},
  };
  return *schema;
}

}  // namespace

Config Config::Parse(std::string_view text, const std::string& source) {
  Config config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = Trim(line);
    if (body.empty() || body[0] == '#' || body[0] == ';') continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) {
        Fail(Error::Kind::kParse, where + "malformed section header");
      }
      section = Trim(std::string_view(body).substr(1, body.size() - 2));
      config.values_[section];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) Fail(Error::Kind::kParse, where + "expected key = value");
    if (section.empty()) Fail(Error::Kind::kParse, where + "key outside of a section");
    const std::string key = Trim(std::string_view(body).substr(0, eq));
    if (key.empty()) Fail(Error::Kind::kParse, where + "empty key");
    config.values_[section][key] = Trim(std::string_view(body).substr(eq + 1));
  }
  return config;
}

Config Config::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(Error::Kind::kIo, "cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return Parse(text.str(), path.string());
}

void Config::Set(const std::string& section, const std::string& key,
                 std::string value) {
  values_[section][key] = std::move(value);
}

void Config::SetAssignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.substr(0, eq).rfind('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos) {
    Fail(Error::Kind::kParse,
         "override '" + std::string(assignment) + "': expected section.key=value");
  }
  Set(Trim(assignment.substr(0, dot)), Trim(assignment.substr(dot + 1, eq - dot - 1)),
      Trim(assignment.substr(eq + 1)));
}

bool Config::Has(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section);
  return it != values_.end() && it->second.contains(key);
}

std::optional<std::string> Config::Get(const std::string& section,
                                       const std::string& key) const {
  const auto it = values_.find(section);
  if (it == values_.end()) return std::nullopt;
  const auto kv = it->second.find(key);
  if (kv == it->second.end()) return std::nullopt;
  return kv->second;
}

std::string Config::GetString(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
  return Get(section, key).value_or(fallback);
}

std::int64_t Config::GetInt(const std::string& section, const std::string& key,
                            std::int64_t fallback) const {
  const auto v = Get(section, key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    BadValue(section, key, *v, "an integer");
  }
  return out;
}

double Config::GetDouble(const std::string& section, const std::string& key,
                         double fallback) const {
  const auto v = Get(section, key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    BadValue(section, key, *v, "a number");
  }
  return out;
}

bool Config::GetBool(const std::string& section, const std::string& key,
                     bool fallback) const {
  const auto v = Get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  BadValue(section, key, *v, "true or false");
}

std::vector<std::string> Config::GetList(const std::string& section,
                                         const std::string& key) const {
  std::vector<std::string> out;
  const auto v = Get(section, key);
  if (!v) return out;
  std::string_view rest = *v;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string item = Trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<double> Config::GetDoubleList(const std::string& section,
                                          const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : GetList(section, key)) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (ec != std::errc() || p != item.data() + item.size()) {
      BadValue(section, key, item, "a comma-separated list of numbers");
    }
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> Config::SectionsWithPrefix(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string head = prefix + ".";
  for (const auto& [name, kv] : values_) {
    if (name.size() > head.size() && name.compare(0, head.size(), head) == 0) {
      out.push_back(name.substr(head.size()));
    }
  }
  return out;
}

void Config::CheckSchema() const {
  for (const auto& [section, kv] : values_) {
    std::string family = section;
    const auto dot = section.find('.');
    if (dot != std::string::npos) family = section.substr(0, dot);
    const bool named = family == "model" || family == "import";
    const auto it = Schema().find(family);
    if (it == Schema().end() || named != (dot != std::string::npos)) {
      Fail(Error::Kind::kInvalidArgument, "unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : kv) {
      if (!it->second.contains(key)) {
        Fail(Error::Kind::kInvalidArgument,
             "unknown config key '" + key + "' in [" + section + "]");
      }
    }
  }
}

std::string Config::Canonical() const {
  std::string out;
  for (const auto& [section, kv] : values_) {
    if (kv.empty()) continue;
    out += "[" + section + "]\n";
    for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  }
  return out;
}

std::string Config::Hash() const {
  Config stripped = *this;
  auto run = stripped.values_.find("run");
  if (run != stripped.values_.end()) {
    run->second.erase("threads");
    run->second.erase("out");
  }
  return ToHex(Sha256(stripped.Canonical())).substr(0, 12);
}

}  // namespace kgcfuse
