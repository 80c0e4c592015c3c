#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace coreguard {

// Seedable stream used for every random draw in the project (weights, keys,
// pads, token sequences). The distributions are implemented here rather than
// through <random> distribution objects so that a seed reproduces the same
// numbers with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  float uniform(float lo, float hi) {
    return static_cast<float>(lo + (static_cast<double>(hi) - lo) * uniform01());
  }

  // Box-Muller; one draw per call, the second variate is discarded.
  float normal(float mean, float stddev);

  // Uniform integer in [0, n) by rejection sampling. n must be >= 1.
  std::size_t below(std::size_t n);

  // Child stream derived from this one; used to fan out independent streams.
  Rng split() { return Rng(next() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coreguard
