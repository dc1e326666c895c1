#pragma once

#include <cstdint>

#include "mbq/math/rng.hpp"

namespace mbq {

// Two-dimensional Sobol sequence (van der Corput + the classical second
// dimension with m = 1, 3, 5, 15, 17, ...), with a seed-derived digital
// shift so distinct seeds give distinct but equally uniform point sets.
class Sobol2D {
 public:
  explicit Sobol2D(std::uint64_t seed = 0) {
    for (int k = 0; k < 32; ++k) v1_[k] = 1u << (31 - k);
    std::uint32_t m = 1;
    for (int k = 0; k < 32; ++k) {
      v2_[k] = m << (31 - k);
      m = (m << 1) ^ m;  // primitive polynomial x + 1
    }
    CounterRng rng(seed);
    shift1_ = static_cast<std::uint32_t>(rng.bits(0));
    shift2_ = static_cast<std::uint32_t>(rng.bits(1));
  }

  // Point at 1-based index i (index 0 would be the origin).
  void point(std::uint64_t i, double& u1, double& u2) const {
    const std::uint32_t gray = static_cast<std::uint32_t>(i ^ (i >> 1));
    std::uint32_t x1 = 0, x2 = 0;
    std::uint32_t g = gray;
    int k = 0;
    while (g) {
      if (g & 1u) {
        x1 ^= v1_[k];
        x2 ^= v2_[k];
      }
      g >>= 1;
      ++k;
    }
    x1 ^= shift1_;
    x2 ^= shift2_;
    u1 = (static_cast<double>(x1) + 0.5) * 0x1.0p-32;
    u2 = (static_cast<double>(x2) + 0.5) * 0x1.0p-32;
  }

 private:
  std::uint32_t v1_[32], v2_[32];
  std::uint32_t shift1_, shift2_;
};

}  // namespace mbq
