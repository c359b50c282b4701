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

#ifndef KGCFUSE_DIGEST_HPP_
#define KGCFUSE_DIGEST_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace kgcfuse {

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 (backed by OpenSSL).
Digest Sha256(std::string_view data);
Digest Sha256File(const std::filesystem::path& path);

std::string ToHex(const Digest& digest);

}  // namespace kgcfuse

#endif  // KGCFUSE_DIGEST_HPP_
