#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cvsdeblur {

// Uniform [0, 1) from the top 53 bits; keeps sampled values independent of
// the standard library's distribution implementations.
inline double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

// Fisher-Yates with the in-house index draw, so shuffles replay identically
// everywhere for a given engine state.
template <typename V>
void shuffle_indices(std::mt19937_64& rng, std::vector<V>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cvsdeblur
