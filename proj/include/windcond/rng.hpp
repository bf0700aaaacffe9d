#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace windcond {

/// splitmix64 step; used to decorrelate nearby integer seeds and to derive
/// independent sub-streams from one base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random source. All sampling in the library goes through this
/// wrapper so the produced sequences are pinned by our own code paths rather
/// than by implementation-defined std::distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (0, 1); safe to pass through log().
  double uniform01_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Index uniform on {0, ..., n-1} by rejection-free scaling.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  /// Standard normal via Box-Muller; caches the second deviate.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = kTau * u2;
    cached_ = radius * std::sin(theta);
    have_cached_ = true;
    return radius * std::cos(theta);
  }

  /// Deterministic sub-seed for stream `salt` of this generator's seed space.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ (0x51d2cc5b0e1f6a3dULL * (salt + 1)));
  }

private:
  static constexpr double kTau = 2.0 * std::numbers::pi;
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace windcond
