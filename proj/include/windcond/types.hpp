#pragma once

#include "windcond/angle.hpp"

namespace windcond {

/// One wind observation: speed in m/s, direction, and the calendar-year label
/// used for block resampling.
struct WindSample {
  double speed = 0.0;
  Angle direction;
  int year = 0;
};

/// Cartesian wind vector components (zonal u, meridional v), m/s.
struct UvPair {
  double u = 0.0;
  double v = 0.0;
};

}  // namespace windcond
