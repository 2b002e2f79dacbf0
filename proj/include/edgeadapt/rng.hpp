#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace edgeadapt {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to fan a master seed out into independent,
// well-mixed sub-seeds so each component is reproducible on its own.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named sub-seed derivation: master seed x FNV-1a of the component name,
// then SplitMix64. derive_seed(s, "trace") != derive_seed(s, "rollout").
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ h);
}

// Indexed sub-seed (episode k of a named stream).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(master, name) ^ splitmix64(index));
}

// Deterministic value in [-1, 1] from a hash key; used where a pure function
// of discrete inputs must look like noise (no RNG state involved).
inline double hash_unit(std::uint64_t key) {
  const std::uint64_t bits = splitmix64(key) >> 11;  // 53 random bits
  return 2.0 * (static_cast<double>(bits) * 0x1.0p-53) - 1.0;
}

}  // namespace edgeadapt
