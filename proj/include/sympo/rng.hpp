#pragma once

#include <cmath>
#include <cstdint>

// Seedable, portable RNG used for all randomness in the project. The
// generator is SplitMix64 (Steele, Lea & Flood 2014): state advances by the
// 64-bit golden-gamma constant and each output is the mix64 finalizer of the
// new state. Substreams are derived by remixing (seed, stream index), so any
// sample can be regenerated in isolation. No wall-clock or OS entropy is
// used anywhere.

namespace sympo {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed for substream `stream` of a master seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool next_bool(double p) { return next_double() < p; }

  // Uniform in [0, bound); bound >= 1. Rejection-free modulo is fine here:
  // bounds are tiny relative to 2^64, so the bias is far below 2^-50.
  std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via the Marsaglia polar method.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double r = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * r;
    have_spare_ = true;
    return u * r;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace sympo
