#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rsr {

/// splitmix64 finaliser (Steele, Lea & Flood constants).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and two indices:
///   mix(m, a, b) = splitmix64(splitmix64(m ^ splitmix64(a)) ^ splitmix64(b + 1))
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(master ^ splitmix64(a)) ^ splitmix64(b + 1));
}

// The standard library's distributions are implementation-defined, so the
// uniform/normal transforms are done here on top of mt19937_64, whose output
// sequence is fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Modulo bias is negligible for the small n used here.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller (one draw per call, second value discarded).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rsr
