#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for the stream named `key` under `root`. Pure in both arguments.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view key) {
  return splitmix64(splitmix64(root) ^ fnv1a64(key));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(splitmix64(root) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline Rng derive_rng(std::uint64_t root, std::string_view key) { return Rng(derive_seed(root, key)); }

}  // namespace qnet
