// SPDX-License-Identifier: Apache-2.0
//
// Little-endian scalar I/O used by the embedding, graph and checkpoint files.

#ifndef IGPOSE_BINIO_HPP_
#define IGPOSE_BINIO_HPP_

#include <bit>
#include <type_traits>
#include <utility>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "igpose/error.hpp"

namespace igpose::binio {

template<typename T>
T byteswap_if_big(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template<typename T>
void write_le(std::ostream& out, T v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template<typename T>
T read_le(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
    fail(ErrorKind::parse, "truncated " + what);
  return byteswap_if_big(v);
}

} // namespace igpose::binio

#endif
