// SPDX-License-Identifier: Apache-2.0
//
// Named random sub-streams: every consumer derives its own seed from the
// run seed, a stream name and up to two indices.

#ifndef IGPOSE_RNG_HPP_
#define IGPOSE_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace igpose {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char ch : stream) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(splitmix64(base ^ h) ^ a) ^ b);
}

} // namespace igpose

#endif
