// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_RANDOM_HPP_
#define QROBUST_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace qrobust {

// std::mt19937_64 is bit-specified by the standard; the distribution helpers
// below are hand-rolled because the <random> distributions are not.
using Generator = std::mt19937_64;

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a named component of an experiment.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
  return splitmix64(seed ^ fnv1a64(label));
}

/// Uniform double in [0, 1).
inline double uniform01(Generator& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline float uniform(Generator& gen, float lo, float hi) {
  return lo + static_cast<float>(uniform01(gen) * (static_cast<double>(hi) - lo));
}

/// Uniform integer in [0, n); n must be positive.
inline std::uint64_t uniform_index(Generator& gen, std::uint64_t n) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = gen();
  } while (r >= limit);
  return r % n;
}

inline bool bernoulli(Generator& gen, double p) { return uniform01(gen) < p; }

/// Standard normal via Box-Muller.
inline double normal01(Generator& gen) {
  double u1 = uniform01(gen);
  while (u1 <= 0.0) u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle(std::vector<T>& items, Generator& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(gen, i)]);
  }
}

}  // namespace qrobust

#endif  // QROBUST_RANDOM_HPP_
