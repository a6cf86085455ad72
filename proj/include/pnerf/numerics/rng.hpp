#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pnerf::num {

// Mixes a list of integers into one 64-bit seed (splitmix64 finalizer per
// element). Used to derive per-ray / per-epoch streams from a root seed.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits; identical on every platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
};

}  // namespace pnerf::num
