#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lineage {

// Seeded sampler with toolchain-independent output. The standard
// distributions (normal_distribution, shuffle, uniform_int_distribution) are
// implementation-defined, so only the raw mt19937_64 stream is used here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0, rejection sampled.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; caches the second variate.
  double normal();

  std::vector<std::size_t> permutation(std::size_t n);

  /// Sorted random subset of size k drawn from 0..n-1.
  std::vector<std::size_t> subset(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lineage
