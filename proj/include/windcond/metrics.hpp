#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "windcond/angle.hpp"
#include "windcond/errors.hpp"

namespace windcond {

/// m equally spaced directions phi_i = 2 pi i / m, i = 0..m-1.
struct DirectionGrid {
  std::vector<double> angles;

  static DirectionGrid uniform(std::size_t m = 629) {
    if (m == 0) throw std::invalid_argument("grid needs at least one angle");
    DirectionGrid g;
    g.angles.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      g.angles[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(m);
    }
    return g;
  }

  std::size_t size() const noexcept { return angles.size(); }

  friend bool operator==(const DirectionGrid& a, const DirectionGrid& b) {
    return a.angles == b.angles;
  }
};

/// A directional curve discretized on a grid.
struct CurveSample {
  DirectionGrid grid;
  std::vector<double> values;

  void validate() const {
    if (grid.size() != values.size()) {
      throw GridMismatchError("curve holds " + std::to_string(values.size()) +
                              " values on a grid of " + std::to_string(grid.size()));
    }
  }
};

namespace detail {

inline void require_shared_grid(const CurveSample& a, const CurveSample& b) {
  a.validate();
  b.validate();
  if (!(a.grid == b.grid)) {
    throw GridMismatchError("curves are discretized on different grids");
  }
}

}  // namespace detail

/// Weighted integrated mean relative error:
///   sum_i f_i |(ghat_i - g_i)/g_i| / sum_i f_i.
inline double wimre(const CurveSample& estimate, const CurveSample& truth,
                    const CurveSample& weight_density) {
  detail::require_shared_grid(estimate, truth);
  detail::require_shared_grid(estimate, weight_density);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double f = weight_density.values[i];
    if (f == 0.0) continue;
    const double g = truth.values[i];
    if (g == 0.0) throw ZeroTruthError(truth.grid.angles[i]);
    num += f * std::fabs((estimate.values[i] - g) / g);
    den += f;
  }
  if (den <= 0.0) {
    throw std::invalid_argument("weight density is identically zero");
  }
  return num / den;
}

struct MseResult {
  CurveSample pointwise;  // MSE at each grid angle
  double average = 0.0;   // unweighted grid mean
};

/// Pointwise mean squared error across replicates, plus its grid average.
inline MseResult mse_curve(std::span<const CurveSample> replicate_estimates,
                           const CurveSample& truth) {
  truth.validate();
  if (replicate_estimates.empty()) {
    throw InsufficientDataError("mse_curve needs at least one replicate");
  }
  const std::size_t m = truth.grid.size();
  MseResult out;
  out.pointwise.grid = truth.grid;
  out.pointwise.values.assign(m, 0.0);
  for (const CurveSample& est : replicate_estimates) {
    detail::require_shared_grid(est, truth);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = est.values[i] - truth.values[i];
      out.pointwise.values[i] += d * d;
    }
  }
  const double nrep = static_cast<double>(replicate_estimates.size());
  double total = 0.0;
  for (double& v : out.pointwise.values) {
    v /= nrep;
    total += v;
  }
  out.average = total / static_cast<double>(m);
  return out;
}

/// Direction-density-weighted integrated MSE:
///   sum_i f_i MSE_i / sum_i f_i.
inline double wimse(std::span<const CurveSample> replicate_estimates,
                    const CurveSample& truth, const CurveSample& weight_density) {
  detail::require_shared_grid(truth, weight_density);
  const MseResult mse = mse_curve(replicate_estimates, truth);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.grid.size(); ++i) {
    num += weight_density.values[i] * mse.pointwise.values[i];
    den += weight_density.values[i];
  }
  if (den <= 0.0) {
    throw std::invalid_argument("weight density is identically zero");
  }
  return num / den;
}

}  // namespace windcond
