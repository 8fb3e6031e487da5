#pragma once

#include <cstdint>
#include <random>

namespace infsamp {

// Seeded generator with platform-stable transforms. std::mt19937_64's raw
// output is fully specified by the standard; the <random> distributions are
// not, so uniform and normal draws are derived here by hand.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform();

  /// Standard normal via Box-Muller; consumes two uniforms per draw.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace infsamp
