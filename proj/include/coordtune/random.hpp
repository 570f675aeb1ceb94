#pragma once

#include <cstdint>
#include <limits>

namespace coordtune {

/// xoshiro256** seeded through splitmix64. The distributions below are
/// implemented here rather than taken from <random> because the standard
/// library leaves their algorithms unspecified, and traces must be identical
/// across toolchains.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t index(std::uint64_t n);
  bool bernoulli(double p);
  /// Box-Muller, one draw per call.
  double normal();
  double normal(double mean, double stddev);
  /// Marsaglia-Tsang; shape > 0.
  double gamma(double shape);
  double beta(double a, double b);

 private:
  std::uint64_t s_[4];
};

/// Mixes a base seed with a stream id so that sub-components draw from
/// independent, reproducible streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace coordtune
