#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cartwin {

/// Deterministic random stream. The raw 64-bit source is std::mt19937_64
/// (sequence fixed by the standard); all variate transforms are done by
/// hand so that a given seed yields the same doubles on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed), spawn_key_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is < 2^-40 for the buffer sizes used here.
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller. Uses two uniforms per draw and keeps
  /// no cached state, so streams stay reproducible under copy.
  double gaussian() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double gaussian(double mean, double std) { return mean + std * gaussian(); }

  /// Independent child stream derived from this stream's seed and an
  /// internal spawn counter (splitmix64 mixing).
  RngStream spawn() {
    spawn_key_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = spawn_key_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return RngStream(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t spawn_key_;
};

}  // namespace cartwin
