#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

#include "windcond/bpqr.hpp"
#include "windcond/bwhr.hpp"
#include "windcond/circstats.hpp"
#include "windcond/metrics.hpp"
#include "windcond/types.hpp"

namespace windcond {

enum class EstimatorKind { Bwhr, Bpqr };

/// Shared estimator configuration used by the study harness, the bootstrap,
/// and the CLI. Defaults are the recommended settings: 36 equal-width bins,
/// harmonic order 8, spline df 18, mixture order selected over 1..6.
struct EstimatorSettings {
  BinningSpec binning{};
  std::size_t k_alpha = 8;
  std::size_t k_beta = 8;
  PeriodicSplineBasis basis{};
  std::size_t vm_min_components = 1;
  std::size_t vm_max_components = 6;
};

inline CurveSample curve_from_mixture(const VonMisesMixtureModel& model,
                                      const DirectionGrid& grid) {
  CurveSample c;
  c.grid = grid;
  c.values.reserve(grid.size());
  for (double phi : grid.angles) {
    c.values.push_back(mixture_pdf(normalize_angle(phi), model));
  }
  return c;
}

inline CurveSample curve_from_bwhr(const DirectionalWeibullModel& model,
                                   const DirectionGrid& grid, double tau) {
  CurveSample c;
  c.grid = grid;
  c.values.reserve(grid.size());
  for (double phi : grid.angles) {
    c.values.push_back(conditional_quantile(model, normalize_angle(phi), tau));
  }
  return c;
}

inline CurveSample curve_from_bpqr(const BpqrModel& model, const DirectionGrid& grid) {
  CurveSample c;
  c.grid = grid;
  c.values.reserve(grid.size());
  for (double phi : grid.angles) {
    c.values.push_back(bpqr_predict(model, normalize_angle(phi)));
  }
  return c;
}

/// Fit the requested estimator and evaluate its tau-quantile curve on the grid.
inline CurveSample quantile_curve(std::span<const WindSample> samples, double tau,
                                  EstimatorKind kind, const EstimatorSettings& settings,
                                  const DirectionGrid& grid) {
  switch (kind) {
    case EstimatorKind::Bwhr: {
      const DirectionalWeibullModel model = bwhr_fit(
          samples, settings.binning, settings.k_alpha, settings.k_beta, grid.size());
      return curve_from_bwhr(model, grid, tau);
    }
    case EstimatorKind::Bpqr: {
      const BpqrModel model = bpqr_fit(samples, tau, settings.basis);
      return curve_from_bpqr(model, grid);
    }
  }
  throw std::logic_error("unknown estimator kind");
}

}  // namespace windcond
