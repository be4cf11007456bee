#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kcnet {

using Rng = std::mt19937_64;

/// Independent sub-streams derived from one root seed.
enum class Stream : std::uint64_t {
  resample = 1,
  init = 2,
  dropout = 3,
  shuffle = 4,
  noise = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ splitmix64(static_cast<std::uint64_t>(stream))) + index);
}

inline Rng make_rng(std::uint64_t root, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

}  // namespace kcnet
