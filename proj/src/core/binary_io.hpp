// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "error.hpp"

// Little-endian scalar I/O shared by the pyramid, params and database formats.
namespace orient::binio {

static_assert(std::endian::native == std::endian::little, "only little-endian hosts are supported");

template <typename T>
  requires std::is_arithmetic_v<T>
void write(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
void write_span(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

/// Reads fail with FormatError on short input: a truncated file is malformed.
template <typename T>
  requires std::is_arithmetic_v<T>
T read(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorCode::FormatError, std::string("truncated input while reading ") + what);
  }
  return value;
}

template <typename T>
  requires std::is_arithmetic_v<T>
void read_span(std::istream& in, std::span<T> values, const char* what) {
  const auto bytes = static_cast<std::streamsize>(values.size_bytes());
  in.read(reinterpret_cast<char*>(values.data()), bytes);
  if (in.gcount() != bytes) {
    throw Error(ErrorCode::FormatError, std::string("truncated input while reading ") + what);
  }
}

inline bool read_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4] = {};
  in.read(buf, 4);
  return in.gcount() == 4 && std::memcmp(buf, magic, 4) == 0;
}

}  // namespace orient::binio
