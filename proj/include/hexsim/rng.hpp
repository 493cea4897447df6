#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace hexsim {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derive the seed of sub-stream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ull));
}

/// Seeded generator. The engine is std::mt19937_64, whose output sequence is fixed
/// by the standard; the distributions below are written out because the std::
/// distribution objects are implementation-defined and would break cross-platform
/// reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    // Lemire-free rejection keeps the arithmetic obvious.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
  }

  /// Standard normal via Box-Muller (one value per call, the sine branch is dropped).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson draw by sequential inversion, chunked so exp(-lambda) never underflows.
  std::uint64_t poisson(double lambda) {
    std::uint64_t total = 0;
    while (lambda > 0.0) {
      const double chunk = std::min(lambda, 200.0);
      lambda -= chunk;
      const double u = uniform();
      double p = std::exp(-chunk);
      double cdf = p;
      std::uint64_t k = 0;
      while (u >= cdf && k < 100000) {
        ++k;
        p *= chunk / static_cast<double>(k);
        cdf += p;
        if (p == 0.0) break;
      }
      total += k;
    }
    return total;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hexsim
