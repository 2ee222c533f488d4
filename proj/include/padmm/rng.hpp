#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace padmm {

/// Portable pseudo-random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are *not* portable across library
/// implementations, so every draw below is derived from raw 64-bit words
/// with explicit arithmetic. Two builds given the same seed produce the same
/// instances.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via the Marsaglia polar method (one value cached).
  double normal();

  /// Index drawn with probability proportional to weights[i].
  std::size_t weighted_index(const std::vector<double>& weights);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace padmm
