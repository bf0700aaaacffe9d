#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "windcond/errors.hpp"
#include "windcond/estimators.hpp"
#include "windcond/metrics.hpp"
#include "windcond/parallel.hpp"
#include "windcond/rng.hpp"
#include "windcond/types.hpp"

namespace windcond {

/// Samples plus an explicit partition into year blocks. Blocks are kept in
/// ascending year order, so two datasets holding the same samples produce the
/// same partition regardless of row order.
struct BlockedDataset {
  std::vector<WindSample> samples;
  std::vector<std::vector<std::size_t>> blocks;  // indices into samples
  std::vector<int> block_years;                  // parallel to blocks

  std::size_t n_blocks() const noexcept { return blocks.size(); }
};

/// Group samples into year blocks (canonical ascending-year order).
inline BlockedDataset make_blocked(std::vector<WindSample> samples) {
  if (samples.empty()) {
    throw InsufficientDataError("blocked dataset needs at least one sample");
  }
  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_year[samples[i].year].push_back(i);
  }
  BlockedDataset out;
  out.samples = std::move(samples);
  out.blocks.reserve(by_year.size());
  out.block_years.reserve(by_year.size());
  for (auto& [year, idx] : by_year) {
    out.block_years.push_back(year);
    out.blocks.push_back(std::move(idx));
  }
  return out;
}

/// Draw n_blocks blocks uniformly with replacement and concatenate their
/// samples. The drawn blocks keep their identity in the output partition, so
/// a block drawn twice contributes two output blocks.
inline BlockedDataset block_resample(const BlockedDataset& data, std::uint64_t seed) {
  if (data.blocks.empty()) {
    throw InsufficientDataError("block_resample on an empty dataset");
  }
  Rng rng(seed);
  BlockedDataset out;
  out.samples.reserve(data.samples.size());
  out.blocks.reserve(data.n_blocks());
  out.block_years.reserve(data.n_blocks());
  for (std::size_t b = 0; b < data.n_blocks(); ++b) {
    const std::size_t pick = rng.uniform_index(data.n_blocks());
    std::vector<std::size_t> new_block;
    new_block.reserve(data.blocks[pick].size());
    for (std::size_t idx : data.blocks[pick]) {
      new_block.push_back(out.samples.size());
      out.samples.push_back(data.samples[idx]);
    }
    out.blocks.push_back(std::move(new_block));
    out.block_years.push_back(data.block_years[pick]);
  }
  return out;
}

struct BootstrapBand {
  DirectionGrid grid;
  std::vector<double> estimate;  // statistic on the original data
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
  std::size_t n_replicates = 0;     // requested
  std::size_t n_successful = 0;     // replicates that produced a curve
  bool tail_clamped = false;        // too few replicates for the requested tails
  std::vector<std::string> failure_log;
};

using CurveStatistic = std::function<CurveSample(const BlockedDataset&)>;

namespace detail {

/// Symmetric 1-based percentile order statistics: the lower bound is the
/// ceil(S a/2)-th smallest replicate and the upper bound the same rank from
/// the top (S=500, level .95 -> 13th and 488th). Clamped into range for tiny
/// S. Returns 0-based indices.
struct PercentileIndices {
  std::size_t lower;
  std::size_t upper;
  bool clamped;
};

inline PercentileIndices percentile_indices(std::size_t s, double level) {
  const double half_alpha = 0.5 * (1.0 - level);
  // s * half_alpha is often meant to be an exact integer (200 replicates at
  // the 95% level gives 5); snap values a rounding error away so the ceil
  // does not overshoot by a whole rank.
  double raw = static_cast<double>(s) * half_alpha;
  const double nearest = std::nearbyint(raw);
  if (std::abs(raw - nearest) < 1e-9) raw = nearest;
  bool clamped = raw < 1.0;
  auto lo = static_cast<std::size_t>(std::ceil(raw));
  if (lo < 1) lo = 1;
  if (2 * lo > s + 1) lo = (s + 1) / 2;
  const std::size_t hi = s + 1 - lo;
  return {lo - 1, hi - 1, clamped};
}

}  // namespace detail

/// Percentile bootstrap band for a curve-valued statistic under year-block
/// resampling. Replicate r uses seed + r, so concurrent execution reproduces
/// the single-threaded result slot for slot.
inline BootstrapBand bootstrap_band(const BlockedDataset& data,
                                    const CurveStatistic& statistic,
                                    std::size_t n_replicates = 500, double level = 0.95,
                                    std::uint64_t seed = 0, std::size_t threads = 1) {
  if (n_replicates == 0) {
    throw std::invalid_argument("bootstrap needs at least one replicate");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::domain_error("confidence level must lie in (0,1)");
  }
  const CurveSample point = statistic(data);
  point.validate();
  const std::size_t m = point.grid.size();

  std::vector<std::optional<CurveSample>> curves(n_replicates);
  std::vector<std::string> failures_by_slot(n_replicates);
  parallel_for(n_replicates, threads, [&](std::size_t r) {
    try {
      CurveSample c = statistic(block_resample(data, seed + r));
      c.validate();
      if (!(c.grid == point.grid)) {
        throw GridMismatchError("replicate statistic changed its grid");
      }
      curves[r] = std::move(c);
    } catch (const std::exception& e) {
      failures_by_slot[r] = "replicate " + std::to_string(r) + ": " + e.what();
    }
  });

  BootstrapBand band;
  band.grid = point.grid;
  band.estimate = point.values;
  band.level = level;
  band.n_replicates = n_replicates;
  for (std::size_t r = 0; r < n_replicates; ++r) {
    if (curves[r]) {
      ++band.n_successful;
    } else {
      band.failure_log.push_back(failures_by_slot[r]);
    }
  }
  if (band.n_successful * 10 < n_replicates * 9) {
    throw UnstableStatisticError(
        "only " + std::to_string(band.n_successful) + " of " +
            std::to_string(n_replicates) + " bootstrap replicates succeeded",
        band.failure_log);
  }

  const auto idx = detail::percentile_indices(band.n_successful, level);
  band.tail_clamped = idx.clamped;
  band.lower.resize(m);
  band.upper.resize(m);
  std::vector<double> column;
  column.reserve(band.n_successful);
  for (std::size_t i = 0; i < m; ++i) {
    column.clear();
    for (std::size_t r = 0; r < n_replicates; ++r) {
      if (curves[r]) column.push_back(curves[r]->values[i]);
    }
    std::sort(column.begin(), column.end());
    band.lower[i] = column[idx.lower];
    band.upper[i] = column[idx.upper];
  }
  return band;
}

/// Difference band between two independent datasets plus the direction-
/// averaged (scalar) difference with its own percentile interval.
struct QuantileDifferenceBand {
  BootstrapBand band;             // future fit minus present fit, per angle
  double mean_difference = 0.0;   // unweighted grid average of the point estimate
  double mean_lower = 0.0;
  double mean_upper = 0.0;
};

/// Bootstrap the per-direction difference (future - present) of tau-quantile
/// curves, resampling both datasets independently within each replicate.
inline QuantileDifferenceBand quantile_difference_band(
    const BlockedDataset& present, const BlockedDataset& future, double tau,
    EstimatorKind kind, const EstimatorSettings& settings = {},
    const DirectionGrid& grid = DirectionGrid::uniform(),
    std::size_t n_replicates = 500, double level = 0.95, std::uint64_t seed = 0,
    std::size_t threads = 1) {
  if (n_replicates == 0) {
    throw std::invalid_argument("bootstrap needs at least one replicate");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::domain_error("confidence level must lie in (0,1)");
  }
  const auto difference_curve = [&](const BlockedDataset& pres,
                                    const BlockedDataset& fut) {
    const CurveSample qp = quantile_curve(pres.samples, tau, kind, settings, grid);
    const CurveSample qf = quantile_curve(fut.samples, tau, kind, settings, grid);
    CurveSample diff;
    diff.grid = grid;
    diff.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      diff.values[i] = qf.values[i] - qp.values[i];
    }
    return diff;
  };
  const auto grid_mean = [&](const CurveSample& c) {
    double s = 0.0;
    for (double v : c.values) s += v;
    return s / static_cast<double>(c.values.size());
  };

  const CurveSample point = difference_curve(present, future);

  std::vector<std::optional<CurveSample>> curves(n_replicates);
  std::vector<std::string> failures_by_slot(n_replicates);
  parallel_for(n_replicates, threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = seed + r;
    try {
      curves[r] = difference_curve(block_resample(present, Rng::derive(rep_seed, 0)),
                                   block_resample(future, Rng::derive(rep_seed, 1)));
    } catch (const std::exception& e) {
      failures_by_slot[r] = "replicate " + std::to_string(r) + ": " + e.what();
    }
  });

  QuantileDifferenceBand out;
  out.band.grid = grid;
  out.band.estimate = point.values;
  out.band.level = level;
  out.band.n_replicates = n_replicates;
  for (std::size_t r = 0; r < n_replicates; ++r) {
    if (curves[r]) {
      ++out.band.n_successful;
    } else {
      out.band.failure_log.push_back(failures_by_slot[r]);
    }
  }
  if (out.band.n_successful * 10 < n_replicates * 9) {
    throw UnstableStatisticError(
        "only " + std::to_string(out.band.n_successful) + " of " +
            std::to_string(n_replicates) + " bootstrap replicates succeeded",
        out.band.failure_log);
  }

  const auto idx = detail::percentile_indices(out.band.n_successful, level);
  out.band.tail_clamped = idx.clamped;
  const std::size_t m = grid.size();
  out.band.lower.resize(m);
  out.band.upper.resize(m);
  std::vector<double> column;
  column.reserve(out.band.n_successful);
  for (std::size_t i = 0; i < m; ++i) {
    column.clear();
    for (std::size_t r = 0; r < n_replicates; ++r) {
      if (curves[r]) column.push_back(curves[r]->values[i]);
    }
    std::sort(column.begin(), column.end());
    out.band.lower[i] = column[idx.lower];
    out.band.upper[i] = column[idx.upper];
  }

  out.mean_difference = grid_mean(point);
  column.clear();
  for (std::size_t r = 0; r < n_replicates; ++r) {
    if (curves[r]) column.push_back(grid_mean(*curves[r]));
  }
  std::sort(column.begin(), column.end());
  out.mean_lower = column[idx.lower];
  out.mean_upper = column[idx.upper];
  return out;
}

}  // namespace windcond
