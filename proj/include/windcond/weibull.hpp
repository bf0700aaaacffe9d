#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "windcond/errors.hpp"
#include "windcond/rng.hpp"

namespace windcond {

/// Two-parameter Weibull: shape alpha > 0, scale beta > 0 (m/s).
struct WeibullParams {
  double shape = 1.0;
  double scale = 1.0;
};

struct WeibullFit {
  WeibullParams params;
  double se_shape = 0.0;
  double se_scale = 0.0;
  double loglik = 0.0;
  std::size_t n = 0;
};

inline void validate_params(const WeibullParams& p) {
  if (!(p.shape > 0.0) || !(p.scale > 0.0)) {
    throw std::domain_error("Weibull parameters must be positive");
  }
}

inline double weibull_pdf(double r, const WeibullParams& p) {
  validate_params(p);
  if (!(r > 0.0)) {
    throw std::domain_error("weibull_pdf requires r > 0");
  }
  const double z = r / p.scale;
  return (p.shape / p.scale) * std::pow(z, p.shape - 1.0) *
         std::exp(-std::pow(z, p.shape));
}

inline double weibull_cdf(double r, const WeibullParams& p) {
  validate_params(p);
  if (r <= 0.0) return 0.0;
  return -std::expm1(-std::pow(r / p.scale, p.shape));
}

inline double weibull_quantile(double tau, const WeibullParams& p) {
  validate_params(p);
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error("quantile level must lie in (0,1)");
  }
  return p.scale * std::pow(-std::log1p(-tau), 1.0 / p.shape);
}

/// Inverse-CDF sampling; deterministic given seed.
inline std::vector<double> weibull_sample(const WeibullParams& p, std::size_t count,
                                          std::uint64_t seed) {
  validate_params(p);
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform01_open();
    out.push_back(p.scale * std::pow(-std::log(u), 1.0 / p.shape));
  }
  return out;
}

namespace detail {

// Weighted power sums of (r_i / r_max)^alpha; scaling by the sample maximum
// keeps the powers representable for any bracketed alpha.
struct ProfileSums {
  double s0 = 0.0;   // sum (r/rm)^a
  double s1 = 0.0;   // sum (r/rm)^a * ln r
  double s2 = 0.0;   // sum (r/rm)^a * (ln r)^2
};

inline ProfileSums profile_sums(std::span<const double> speeds, double alpha, double rmax) {
  ProfileSums s;
  for (double r : speeds) {
    const double w = std::pow(r / rmax, alpha);
    const double lr = std::log(r);
    s.s0 += w;
    s.s1 += w * lr;
    s.s2 += w * lr * lr;
  }
  return s;
}

// Profile score for the shape parameter:
//   g(alpha) = 1/alpha + mean(ln r) - sum(r^a ln r)/sum(r^a).
// g is strictly decreasing, so a bracketing Newton is globally convergent.
inline double profile_score(std::span<const double> speeds, double alpha, double rmax,
                            double mean_log) {
  const ProfileSums s = profile_sums(speeds, alpha, rmax);
  return 1.0 / alpha + mean_log - s.s1 / s.s0;
}

}  // namespace detail

inline double weibull_loglik(std::span<const double> speeds, const WeibullParams& p) {
  double ll = 0.0;
  const double n = static_cast<double>(speeds.size());
  double sum_log = 0.0;
  double sum_pow = 0.0;
  for (double r : speeds) {
    sum_log += std::log(r);
    sum_pow += std::pow(r / p.scale, p.shape);
  }
  ll = n * (std::log(p.shape) - p.shape * std::log(p.scale)) +
       (p.shape - 1.0) * sum_log - sum_pow;
  return ll;
}

/// Maximum-likelihood fit with standard errors from the inverse observed
/// information matrix. The shape score is solved by safeguarded Newton on
/// [1e-3, 1e3]; the scale then has the closed form
/// beta = (mean r^alpha)^(1/alpha).
inline WeibullFit weibull_mle(std::span<const double> speeds) {
  const std::size_t n = speeds.size();
  if (n < 5) {
    throw InsufficientDataError("weibull_mle needs at least 5 observations, got " +
                                std::to_string(n));
  }
  double rmin = speeds[0], rmax = speeds[0];
  double mean_log = 0.0;
  for (double r : speeds) {
    if (!(r > 0.0)) {
      throw std::domain_error("weibull_mle requires strictly positive speeds");
    }
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    mean_log += std::log(r);
  }
  mean_log /= static_cast<double>(n);
  if (rmin == rmax) {
    throw DegenerateSampleError("all speeds equal; Weibull information is singular");
  }

  double lo = 1e-3, hi = 1e3;
  double glo = detail::profile_score(speeds, lo, rmax, mean_log);
  double ghi = detail::profile_score(speeds, hi, rmax, mean_log);
  if (glo < 0.0 || ghi > 0.0) {
    throw DegenerateSampleError("profile score has no root in [1e-3, 1e3]");
  }
  double alpha = 1.0;
  if (alpha <= lo || alpha >= hi) alpha = std::sqrt(lo * hi);
  for (int it = 0; it < 200; ++it) {
    const detail::ProfileSums s = detail::profile_sums(speeds, alpha, rmax);
    const double mean_w = s.s1 / s.s0;
    const double g = 1.0 / alpha + mean_log - mean_w;
    if (std::fabs(g) < 1e-10) break;
    if (g > 0.0) {
      lo = alpha;
    } else {
      hi = alpha;
    }
    const double var_w = s.s2 / s.s0 - mean_w * mean_w;
    const double dg = -1.0 / (alpha * alpha) - var_w;
    double next = alpha - g / dg;
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);  // bisection fallback
    }
    alpha = next;
  }

  const detail::ProfileSums s = detail::profile_sums(speeds, alpha, rmax);
  const double beta = rmax * std::pow(s.s0 / static_cast<double>(n), 1.0 / alpha);

  // Observed information: negated Hessian of the log-likelihood at the MLE.
  const double dn = static_cast<double>(n);
  double t0 = 0.0, t1 = 0.0, t2 = 0.0;  // sums of z, z*ln(r/b), z*ln(r/b)^2 with z=(r/b)^a
  for (double r : speeds) {
    const double lz = std::log(r / beta);
    const double z = std::exp(alpha * lz);
    t0 += z;
    t1 += z * lz;
    t2 += z * lz * lz;
  }
  const double h_aa = -dn / (alpha * alpha) - t2;
  const double h_bb = alpha / (beta * beta) * (dn - (alpha + 1.0) * t0);
  const double h_ab = -dn / beta + t0 / beta + (alpha / beta) * t1;
  const double det = h_aa * h_bb - h_ab * h_ab;
  if (!(det > 0.0) || !(h_aa < 0.0)) {
    throw DegenerateSampleError("observed information is not positive definite");
  }
  const double var_shape = -h_bb / det;
  const double var_scale = -h_aa / det;
  if (!(var_shape > 0.0) || !(var_scale > 0.0)) {
    throw DegenerateSampleError("nonpositive variance from observed information");
  }

  WeibullFit fit;
  fit.params = WeibullParams{alpha, beta};
  fit.se_shape = std::sqrt(var_shape);
  fit.se_scale = std::sqrt(var_scale);
  fit.loglik = weibull_loglik(speeds, fit.params);
  fit.n = n;
  return fit;
}

}  // namespace windcond
