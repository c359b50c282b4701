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

#ifndef KGCFUSE_COMMON_HPP_
#define KGCFUSE_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kgcfuse {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Base class of every error raised by the library. The kind lets callers
// (mostly the CLI) distinguish bad input from internal failures without
// string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kInvalidArgument,
    kParse,
    kIo,
    kFormat,
    kChecksum,
    kDegenerate,
    kNumerical,
    kState,
  };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void Fail(Error::Kind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void Require(bool condition, const std::string& what) {
  if (!condition) Fail(Error::Kind::kInvalidArgument, what);
}

}  // namespace kgcfuse

#endif  // KGCFUSE_COMMON_HPP_
