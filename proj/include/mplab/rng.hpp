#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mplab {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent deterministic substream for a (seed, label) pair. Loss draws,
/// exploration noise and replay sampling each fork their own label so that
/// changing one consumer never shifts the others.
inline Rng rng_fork(std::uint64_t seed, std::string_view label) {
  return Rng(splitmix64(splitmix64(seed) ^ fnv1a(label)));
}

/// Uniform [0,1) from the top 53 bits; unlike std::uniform_real_distribution
/// the mapping is fixed across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Integer in [0, n) by rejection, portable like uniform01.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

/// Standard normal via Box-Muller (one draw per call, two uniforms consumed).
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return splitmix64(splitmix64(seed) ^ fnv1a(label));
}

}  // namespace mplab
