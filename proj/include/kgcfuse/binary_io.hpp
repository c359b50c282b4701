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

// Little-endian primitive encoding shared by the checkpoint and score-matrix
// formats.

#ifndef KGCFUSE_BINARY_IO_HPP_
#define KGCFUSE_BINARY_IO_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>

#include "kgcfuse/common.hpp"

namespace kgcfuse::binary {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T ToLittle(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
}

template <typename T>
void Write(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  value = ToLittle(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void WriteSpan(std::ostream& out, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (const T& v : values) Write(out, v);
  }
}

inline void WriteBytes(std::ostream& out, std::span<const std::uint8_t> bytes) {
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// u32 byte length followed by the raw UTF-8 bytes.
inline void WriteString(std::ostream& out, const std::string& s) {
  Write<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Reads exactly sizeof(T) bytes or reports truncation with `context`.
template <typename T>
T Read(std::istream& in, const std::string& context) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    Fail(Error::Kind::kFormat, "truncated " + context);
  }
  return ToLittle(value);
}

template <typename T>
bool ReadSpan(std::istream& in, std::span<T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
    return in.gcount() == static_cast<std::streamsize>(values.size_bytes());
  } else {
    for (T& v : values) {
      in.read(reinterpret_cast<char*>(&v), sizeof(T));
      if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) return false;
      v = ToLittle(v);
    }
    return true;
  }
}

inline std::string ReadString(std::istream& in, const std::string& context) {
  const auto size = Read<std::uint32_t>(in, context + " length");
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (in.gcount() != static_cast<std::streamsize>(size)) {
    Fail(Error::Kind::kFormat, "truncated " + context);
  }
  return s;
}

// Reads and compares a 4-byte magic tag.
inline void ExpectMagic(std::istream& in, const char (&magic)[5],
                        const std::string& what) {
  char buf[4] = {};
  in.read(buf, 4);
  if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
    Fail(Error::Kind::kFormat,
         std::string("bad magic: not a ") + what + " file (expected \"" +
             magic + "\")");
  }
}

}  // namespace kgcfuse::binary

#endif  // KGCFUSE_BINARY_IO_HPP_
