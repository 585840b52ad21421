#pragma once

#include <cstdint>
#include <span>

namespace podcount {

/// Seeded 64-bit generator used for every random draw in the toolkit.
///
/// State update (xorshift64*):
///   s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;
///   out = s * 0x2545F4914F6CDD1D
/// The seed is expanded with one SplitMix64 step so that small and zero seeds
/// still give a nonzero, well-mixed state. Uniform doubles take the top 53
/// bits of the output. All derived distributions are written out below so
/// that streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept;
  /// Box-Muller; consumes two uniforms per call.
  double normal(double mean, double stddev) noexcept;
  /// Knuth multiplication method for small rates, normal approximation above 64.
  std::uint64_t poisson(double rate) noexcept;
  /// Marsaglia-Tsang.
  double gamma(double shape) noexcept;
  double beta(double alpha, double beta) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a 64-bit hash, used for checkpoint block checksums and report hashes.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

}  // namespace podcount
