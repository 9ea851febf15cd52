#pragma once

// Seed derivation for named random sub-streams. Every draw in a run comes
// from an engine seeded by derive_seed(master, stream, indices...), so any
// component can be re-run in isolation and reproduces bit-for-bit.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mfls {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = splitmix64(master ^ fnv1a64(stream));
  for (auto i : indices) h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return h;
}

using Engine = std::mt19937_64;

}  // namespace mfls
