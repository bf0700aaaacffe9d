#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "windcond/angle.hpp"

namespace windcond {

namespace detail {

// Power series I_nu(x) = (x/2)^nu Sum_m (x^2/4)^m / (m! (m+nu)!), nu in {0,1}.
// All terms are positive, so the sum is stable; used for |x| <= 50.
inline double bessel_i_series(double x, int nu) {
  const double t = 0.25 * x * x;
  double term = (nu == 0) ? 1.0 : 0.5 * x;
  double sum = term;
  for (int m = 1; m < 1000; ++m) {
    term *= t / (static_cast<double>(m) * (m + nu));
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return sum;
}

// Asymptotic correction series S_nu(x) with I_nu(x) ~ e^x / sqrt(2 pi x) * S_nu(x).
// Terms are summed while they keep shrinking.
inline double bessel_asymptotic_correction(double x, int nu) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (odd * odd - mu) / (8.0 * k * x);
    if (std::fabs(term) >= prev) break;
    sum += term;
    prev = std::fabs(term);
    if (std::fabs(term) < 1e-18) break;
  }
  return sum;
}

constexpr double kBesselSeriesCutoff = 50.0;

}  // namespace detail

/// Modified Bessel function of the first kind, order zero. Even in x.
/// Throws std::range_error once the value exceeds the double range.
inline double bessel_i0(double x) {
  x = std::fabs(x);
  if (x <= detail::kBesselSeriesCutoff) {
    return detail::bessel_i_series(x, 0);
  }
  const double log_prefactor = x - 0.5 * std::log(kTwoPi * x);
  const double correction = detail::bessel_asymptotic_correction(x, 0);
  const double log_value = log_prefactor + std::log(correction);
  if (log_value >= std::log(std::numeric_limits<double>::max())) {
    throw std::range_error("bessel_i0 overflow at x=" + std::to_string(x));
  }
  return std::exp(log_prefactor) * correction;
}

/// Modified Bessel function of the first kind, order one. Odd in x.
inline double bessel_i1(double x) {
  const double ax = std::fabs(x);
  double value;
  if (ax <= detail::kBesselSeriesCutoff) {
    value = detail::bessel_i_series(ax, 1);
  } else {
    const double log_prefactor = ax - 0.5 * std::log(kTwoPi * ax);
    const double correction = detail::bessel_asymptotic_correction(ax, 1);
    const double log_value = log_prefactor + std::log(correction);
    if (log_value >= std::log(std::numeric_limits<double>::max())) {
      throw std::range_error("bessel_i1 overflow at x=" + std::to_string(ax));
    }
    value = std::exp(log_prefactor) * correction;
  }
  return x < 0.0 ? -value : value;
}

/// log I_0(x); valid far beyond the overflow point of bessel_i0.
inline double log_bessel_i0(double x) {
  x = std::fabs(x);
  if (x <= detail::kBesselSeriesCutoff) {
    return std::log(detail::bessel_i_series(x, 0));
  }
  return x - 0.5 * std::log(kTwoPi * x) +
         std::log(detail::bessel_asymptotic_correction(x, 0));
}

/// Mean resultant length of a von Mises distribution, A(kappa) = I1(kappa)/I0(kappa).
inline double bessel_ratio(double kappa) {
  if (kappa == 0.0) return 0.0;
  if (kappa <= detail::kBesselSeriesCutoff) {
    return detail::bessel_i_series(kappa, 1) / detail::bessel_i_series(kappa, 0);
  }
  return detail::bessel_asymptotic_correction(kappa, 1) /
         detail::bessel_asymptotic_correction(kappa, 0);
}

/// Invert A(kappa) = rbar: Banerjee closed-form start refined by Newton steps.
/// A is strictly increasing, so the iteration is safe; result capped at `cap`.
inline double inv_bessel_ratio(double rbar, double cap = 1e4) {
  if (rbar <= 0.0) return 0.0;
  if (rbar >= 1.0) return cap;
  double kappa = rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar);
  if (kappa > cap) return cap;
  if (kappa <= 0.0) kappa = 1e-8;
  for (int it = 0; it < 25; ++it) {
    const double a = bessel_ratio(kappa);
    const double da = 1.0 - a * a - a / kappa;
    if (da <= 0.0) break;
    const double step = (a - rbar) / da;
    kappa -= step;
    if (kappa <= 0.0) kappa = 1e-10;
    if (kappa > cap) return cap;
    if (std::fabs(step) < 1e-10 * (1.0 + kappa)) break;
  }
  return std::min(kappa, cap);
}

}  // namespace windcond
