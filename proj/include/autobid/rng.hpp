#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace autobid {

// Deterministic, self-contained RNG. We do not use <random> distributions:
// their output is implementation-defined, and replay determinism is part of
// the environment contract.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Decorrelate nearby seeds before use.
    next_u64();
    next_u64();
  }

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection sampling keeps the distribution exact.
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double two_pi = 6.283185307179586;
    const double u = 1.0 - uniform01();  // avoid log(0)
    const double angle = two_pi * uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u));
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double lognormal(double location, double scale) {
    return std::exp(location + scale * normal());
  }

  // Fisher-Yates permutation of [0, n).
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(below(static_cast<uint64_t>(i) + 1));
      std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
    }
    return p;
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream from a base seed and stream labels.
// Used to seed-split per episode, per iteration, per sample.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
  uint64_t z = base ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xc2b2ae3d27d4eb4full);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace autobid
