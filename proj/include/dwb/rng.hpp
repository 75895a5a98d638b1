#pragma once

#include <cstdint>
#include <random>

namespace dwb {

/// Engine used everywhere; mt19937_64 output is specified bit-for-bit by the
/// standard, unlike the std distributions, so draws are built from raw bits.
using Rng = std::mt19937_64;

/// Uniform draw on the open interval (0, 1).
inline double uniformOpen(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform draw on [0, 1).
inline double uniformHalfOpen(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound).
inline std::uint64_t uniformIndex(Rng& rng, std::uint64_t bound) {
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

/// SplitMix64 finalizer; used to derive independent per-trial seeds.
inline std::uint64_t mixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) {
  return mixSeed(seed ^ mixSeed(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace dwb
