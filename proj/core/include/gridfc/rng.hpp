#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace gridfc {

/// Uniform double in [0, 1) from the generator's top 53 bits. Used instead of
/// std::uniform_real_distribution so that streams are identical across
/// standard-library implementations.
inline double rand_uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double rand_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_uniform01(rng);
}

/// Uniform index in [0, n) by rejection sampling; unbiased and portable.
inline std::size_t rand_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % n);
}

}  // namespace gridfc
