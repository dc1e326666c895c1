#pragma once

#include <cstdint>

#include "mbq/math/normal.hpp"

namespace mbq {

// Counter-based generator: draw i of stream `seed` is a fixed bijective hash
// of (seed, i), so any subrange can be produced on any thread with identical
// results. The mixer is SplitMix64's finalizer applied twice.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t index) const {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = mix(z);
    z = mix(z ^ 0xbf58476d1ce4e5b9ULL);
    return z;
  }

  // Uniform on (0, 1), never hitting the endpoints.
  double uniform(std::uint64_t index) const {
    return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t index) const { return norm_cdf_inv(uniform(index)); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
};

}  // namespace mbq
