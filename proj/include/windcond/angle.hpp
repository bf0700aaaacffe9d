#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace windcond {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Direction angle in radians, kept normalized to [0, 2pi).
class Angle {
public:
  constexpr Angle() = default;

  static Angle from_radians(double theta) {
    if (!std::isfinite(theta)) {
      throw std::domain_error("angle must be finite");
    }
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;  // fmod/add round-off can land exactly on 2pi
    return Angle(r);
  }

  static Angle from_degrees(double deg) {
    return from_radians(deg * std::numbers::pi / 180.0);
  }

  double radians() const noexcept { return rad_; }
  double degrees() const noexcept { return rad_ * 180.0 / std::numbers::pi; }

  friend bool operator==(Angle a, Angle b) noexcept { return a.rad_ == b.rad_; }
  friend bool operator<(Angle a, Angle b) noexcept { return a.rad_ < b.rad_; }

private:
  explicit constexpr Angle(double normalized) : rad_(normalized) {}
  double rad_ = 0.0;
};

inline Angle normalize_angle(double theta) { return Angle::from_radians(theta); }

/// Shortest arc length between two directions given in radians; range [0, pi].
inline double arc_distance(double a, double b) {
  double d = std::fmod(std::fabs(a - b), kTwoPi);
  return std::numbers::pi - std::fabs(std::numbers::pi - d);
}

inline double arc_distance(Angle a, Angle b) {
  return arc_distance(a.radians(), b.radians());
}

}  // namespace windcond
