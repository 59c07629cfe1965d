#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "sparseobs/errors.hpp"

namespace sparseobs {

/// Identifies the generator + distribution code. Outputs are bit-stable across
/// platforms as long as this tag does not change.
inline constexpr const char* kRngVersion = "sparseobs-rng-v1";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent substream seed. Replica fan-out uses the documented
/// `seed_base + replica_index` convention; named substreams inside one replica
/// (graph, world, theta, ...) go through this mix.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream ^ 0xA5A5A5A55A5A5A5AULL));
}

/// mt19937_64 raw stream (exactly specified by the standard) plus explicit
/// distribution transforms, so draws do not depend on the standard library's
/// unspecified std::*_distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Uniform in [0, n). n must be positive.
  int uniform_int(int n) {
    if (n <= 0) throw ValidationError("uniform_int: n must be positive");
    int v = static_cast<int>(uniform01() * n);
    return v < n ? v : n - 1;
  }

  /// Knuth's product method; exact for any mean >= 0.
  int poisson(double mean) {
    if (mean < 0) throw ValidationError("poisson: mean must be nonnegative");
    if (mean == 0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++k;
      prod *= uniform01();
    }
    return k;
  }

  /// Draws an index from a probability vector (assumed normalized) by CDF walk.
  int categorical(std::span<const double> probs) {
    const double u = uniform01();
    double cum = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0) last_positive = static_cast<int>(i);
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    if (last_positive < 0) throw ValidationError("categorical: all-zero weights");
    return last_positive;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sparseobs
