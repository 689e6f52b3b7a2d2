#pragma once

#include <cstdint>
#include <random>

namespace timgen {

/// Seeded random stream. Uniform draws take the top 53 bits of a 64-bit
/// Mersenne Twister; Gaussian draws use the Box-Muller transform, caching the
/// second value of each pair. Both are fixed here rather than delegated to
/// std::*_distribution, whose algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent child stream; derivation depends only on the seed and `stream`.
  Rng derive(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, used to scramble seeds and hashes.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace timgen
