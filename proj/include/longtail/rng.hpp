#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace longtail {

/// splitmix64 finaliser; used to decorrelate (seed, stream) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator for one replicate stream. Streams with the same seed and
/// different indices are independent; (seed, stream) fully determines output.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard exponential variate.
  double exponential() { return -std::log(uniform()); }
  double normal() {
    // Box-Muller; one value per call keeps the stream position simple.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  long poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<long> d(mean);
    return d(engine_);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace longtail
