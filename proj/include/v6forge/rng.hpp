#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace v6forge::rng {

using Engine = std::mt19937_64;

/// One splitmix64 step; used to whiten seeds before feeding mt19937_64.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and stream tags.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0) {
  std::uint64_t s = seed;
  std::uint64_t out = splitmix64(s);
  s ^= a * 0x9e3779b97f4a7c15ull;
  out ^= splitmix64(s);
  s ^= b * 0xc2b2ae3d27d4eb4full;
  out ^= splitmix64(s);
  s ^= c * 0x165667b19e3779f9ull;
  out ^= splitmix64(s);
  return out;
}

inline Engine engine(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                     std::uint64_t c = 0) {
  return Engine(derive(seed, a, b, c));
}

/// Uniform double in [0,1) with 53 random bits. Hand-rolled so the stream is
/// identical across standard library implementations.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

/// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t rem = std::numeric_limits<std::uint64_t>::max() % n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
  std::uint64_t x = eng();
  while (x >= limit) x = eng();
  return x % n;
}

/// Standard normal via Box-Muller (one value per call, no cached spare).
inline double normal(Engine& eng, double mean = 0.0, double stddev = 1.0) {
  double u1 = uniform01(eng);
  while (u1 <= 0.0) u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// In-place Fisher-Yates shuffle driven by below(); portable ordering.
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(below(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Indices 0..n-1 in shuffled order.
inline std::vector<std::size_t> permutation(std::size_t n, Engine& eng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle(idx, eng);
  return idx;
}

}  // namespace v6forge::rng
