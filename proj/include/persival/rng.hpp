#pragma once

#include <cstdint>

namespace persival {

/// xorshift64* stream with a 64-bit seed.
///
/// The exact recurrence and draw conventions are part of the project contract
/// (see docs/machine-model.md): every simulated run is reproducible
/// bit-for-bit from its seed, and zero-probability checks consume no draws.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed != 0 ? seed : kZeroSeedSubstitute) {}

  uint64_t next_u64() {
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1Dull;
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Bernoulli trial. p <= 0 and p >= 1 short-circuit without consuming a draw.
  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_unit() < p;
  }

  /// Uniform in [0, bound). Plain modulo; the bias is irrelevant at the bound
  /// sizes used here and keeps the stream easy to reproduce elsewhere.
  uint64_t below(uint64_t bound) { return next_u64() % bound; }

 private:
  static constexpr uint64_t kZeroSeedSubstitute = 0x9E3779B97F4A7C15ull;

  uint64_t state_;
};

}  // namespace persival
