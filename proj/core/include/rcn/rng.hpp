#pragma once

#include <cstdint>

namespace rcn {

// Version tag recorded in corpus manifests; bump when the generator or the
// way streams are derived from (seed, index) changes.
inline constexpr const char* kGeneratorVersion = "splitmix64-v1";

// Counter-based 64-bit generator (splitmix64). Each (seed, stream) pair
// yields an independent deterministic sequence, so corpus samples can be
// generated out of order or in parallel.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) {
    state_ = mix(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace rcn
