#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Deterministic randomness helpers. All sampling in this project goes
// through these functions with an explicit seed; std::uniform_int_distribution
// and friends are off limits because their output is implementation-defined.
// mt19937_64 itself is pinned bit-for-bit by the standard.

namespace clinsynth {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Unbiased draw in [0, n) via rejection on the top of the 64-bit range.
inline std::uint64_t bounded_u64(Rng& rng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

// Uniform double in [0, 1) with 53 random bits.
inline double unit_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fisher-Yates.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded_u64(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Selection sampling (Knuth's Algorithm S): uniform without replacement,
// preserves input order, one pass.
inline std::vector<std::size_t> sample_indices(std::size_t population,
                                               std::size_t n,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::size_t need = n;
  for (std::size_t i = 0; i < population && need > 0; ++i) {
    if (bounded_u64(rng, population - i) < need) {
      picked.push_back(i);
      --need;
    }
  }
  return picked;
}

}  // namespace clinsynth
