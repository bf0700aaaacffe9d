#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "windcond/angle.hpp"
#include "windcond/circstats.hpp"
#include "windcond/errors.hpp"
#include "windcond/metrics.hpp"
#include "windcond/types.hpp"
#include "windcond/weibull.hpp"

namespace windcond {

enum class BinScheme { EqualWidth, EqualFrequency };
enum class BinSummary { CircularMedian, Midpoint };

struct BinningSpec {
  /// 0 requests auto mode: N = round(n/200), clamped to at least 2K+2.
  std::size_t n_bins = 36;
  BinScheme scheme = BinScheme::EqualWidth;
  BinSummary summary = BinSummary::CircularMedian;
};

/// One directional bin: arc [lo, hi) in radians (hi may exceed 2 pi when the
/// arc wraps through zero) and the member samples.
struct DirectionBin {
  std::size_t index = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<WindSample> members;
};

struct BinFit {
  Angle summary_angle;
  WeibullFit fit;
  std::size_t count = 0;
  std::size_t bin_index = 0;
};

struct DroppedBin {
  std::size_t bin_index = 0;
  std::size_t count = 0;
  std::string reason;
};

struct FitBinsResult {
  std::vector<BinFit> fits;
  std::vector<DroppedBin> dropped;
};

/// Partition samples into directional bins. Equal-width arcs are anchored at
/// zero: [2 pi (j-1)/N, 2 pi j/N). Equal-frequency bins are contiguous runs of
/// the direction-sorted sample with counts differing by at most one.
inline std::vector<DirectionBin> bin_directions(std::span<const WindSample> samples,
                                                const BinningSpec& spec) {
  if (samples.empty()) {
    throw InsufficientDataError("bin_directions on empty sample");
  }
  if (spec.n_bins == 0) {
    throw std::invalid_argument("bin count must be resolved before binning");
  }
  const std::size_t n_bins = spec.n_bins;
  std::vector<DirectionBin> bins(n_bins);

  if (spec.scheme == BinScheme::EqualWidth) {
    const double width = kTwoPi / static_cast<double>(n_bins);
    for (std::size_t j = 0; j < n_bins; ++j) {
      bins[j].index = j;
      bins[j].lo = width * static_cast<double>(j);
      bins[j].hi = width * static_cast<double>(j + 1);
    }
    for (const WindSample& s : samples) {
      auto j = static_cast<std::size_t>(s.direction.radians() / width);
      if (j >= n_bins) j = n_bins - 1;  // guard the phi -> 2pi round-off edge
      bins[j].members.push_back(s);
    }
    return bins;
  }

  std::vector<WindSample> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const WindSample& a, const WindSample& b) {
                     return a.direction < b.direction;
                   });
  const std::size_t n = sorted.size();
  const std::size_t base = n / n_bins;
  const std::size_t extra = n % n_bins;
  std::size_t pos = 0;
  std::vector<std::size_t> starts(n_bins);
  for (std::size_t j = 0; j < n_bins; ++j) {
    starts[j] = pos;
    const std::size_t take = base + (j < extra ? 1 : 0);
    bins[j].index = j;
    bins[j].members.assign(sorted.begin() + static_cast<std::ptrdiff_t>(pos),
                           sorted.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
  }
  // Arc boundaries at the first member of each nonempty run; the final arc
  // wraps around to close the circle.
  for (std::size_t j = 0; j < n_bins; ++j) {
    const double lo = bins[j].members.empty()
                          ? (j > 0 ? bins[j - 1].hi : 0.0)
                          : bins[j].members.front().direction.radians();
    bins[j].lo = lo;
  }
  for (std::size_t j = 0; j < n_bins; ++j) {
    const double next_lo = (j + 1 < n_bins) ? bins[j + 1].lo : bins[0].lo + kTwoPi;
    bins[j].hi = next_lo;
  }
  return bins;
}

namespace detail {

inline Angle bin_summary_angle(const DirectionBin& bin, BinSummary mode) {
  if (mode == BinSummary::Midpoint) {
    return normalize_angle(0.5 * (bin.lo + bin.hi));
  }
  std::vector<Angle> dirs;
  dirs.reserve(bin.members.size());
  for (const WindSample& s : bin.members) dirs.push_back(s.direction);
  return circular_median(dirs);
}

}  // namespace detail

/// Weibull-fit every bin with at least min_count members; smaller or
/// non-fittable bins are excluded and reported. If fewer than min_usable bins
/// survive, the downstream regression is hopeless and we fail here.
inline FitBinsResult fit_bins(std::span<const DirectionBin> bins,
                              std::size_t min_count = 5, std::size_t min_usable = 0,
                              BinSummary summary = BinSummary::CircularMedian) {
  FitBinsResult out;
  for (const DirectionBin& bin : bins) {
    if (bin.members.size() < min_count) {
      out.dropped.push_back({bin.index, bin.members.size(),
                             "fewer than " + std::to_string(min_count) + " members"});
      continue;
    }
    std::vector<double> speeds;
    speeds.reserve(bin.members.size());
    for (const WindSample& s : bin.members) speeds.push_back(s.speed);
    try {
      BinFit bf;
      bf.fit = weibull_mle(speeds);
      bf.summary_angle = detail::bin_summary_angle(bin, summary);
      bf.count = bin.members.size();
      bf.bin_index = bin.index;
      if (!(bf.fit.se_shape > 0.0) || !(bf.fit.se_scale > 0.0) ||
          !std::isfinite(bf.fit.se_shape) || !std::isfinite(bf.fit.se_scale)) {
        out.dropped.push_back({bin.index, bin.members.size(),
                               "standard errors not computable"});
        continue;
      }
      out.fits.push_back(std::move(bf));
    } catch (const Error& e) {
      out.dropped.push_back({bin.index, bin.members.size(), e.what()});
    } catch (const std::domain_error& e) {
      out.dropped.push_back({bin.index, bin.members.size(), e.what()});
    }
  }
  if (out.fits.size() < min_usable) {
    throw InsufficientBinsError(
        std::to_string(out.fits.size()) + " usable bins, need " +
        std::to_string(min_usable) + " for the harmonic regression");
  }
  return out;
}

/// Truncated Fourier series b0 + sum_k (a_k cos k phi + b_k sin k phi).
struct HarmonicCoefficients {
  double intercept = 0.0;
  std::vector<std::pair<double, double>> pairs;  // (a_k, b_k), k = 1..K

  std::size_t order() const noexcept { return pairs.size(); }

  double eval(Angle phi) const {
    double y = intercept;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double kphi = static_cast<double>(k + 1) * phi.radians();
      y += pairs[k].first * std::cos(kphi) + pairs[k].second * std::sin(kphi);
    }
    return y;
  }
  // Raw radians are reduced to [0, 2pi) first, so eval(0) == eval(2pi)
  // exactly rather than up to trig round-off.
  double eval(double phi) const { return eval(Angle::from_radians(phi)); }
};

struct HarmonicPoint {
  double angle = 0.0;
  double value = 0.0;
  double weight = 1.0;
};

/// Weighted least squares on the basis {1, cos k phi, sin k phi}; solved by
/// column-pivoted QR on the weighted design so rank problems surface cleanly.
inline HarmonicCoefficients harmonic_wls(std::span<const HarmonicPoint> points,
                                         std::size_t K) {
  const std::size_t p = 2 * K + 1;
  if (points.size() < 2 * K + 2) {
    throw InsufficientBinsError("harmonic regression of order " + std::to_string(K) +
                                " needs at least " + std::to_string(2 * K + 2) +
                                " points, got " + std::to_string(points.size()));
  }
  for (const HarmonicPoint& pt : points) {
    if (!(pt.weight > 0.0)) {
      throw std::invalid_argument("harmonic_wls weights must be positive");
    }
  }
  Eigen::MatrixXd X(points.size(), p);
  Eigen::VectorXd y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double sw = std::sqrt(points[i].weight);
    X(static_cast<Eigen::Index>(i), 0) = sw;
    for (std::size_t k = 1; k <= K; ++k) {
      const double kphi = static_cast<double>(k) * points[i].angle;
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * k - 1)) =
          sw * std::cos(kphi);
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * k)) =
          sw * std::sin(kphi);
    }
    y(static_cast<Eigen::Index>(i)) = sw * points[i].value;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    throw SingularDesignError("harmonic design is rank deficient (rank " +
                              std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  HarmonicCoefficients coef;
  coef.intercept = beta(0);
  coef.pairs.resize(K);
  for (std::size_t k = 1; k <= K; ++k) {
    coef.pairs[k - 1] = {beta(static_cast<Eigen::Index>(2 * k - 1)),
                         beta(static_cast<Eigen::Index>(2 * k))};
  }
  return coef;
}

/// Conditional speed model: Weibull shape and scale as harmonic curves of
/// direction, with the per-bin fits retained for diagnostics.
struct DirectionalWeibullModel {
  HarmonicCoefficients alpha_curve;
  HarmonicCoefficients beta_curve;
  BinningSpec binning;
  std::vector<BinFit> bin_fits;
  std::vector<DroppedBin> dropped_bins;

  double alpha(double phi) const { return alpha_curve.eval(phi); }
  double beta(double phi) const { return beta_curve.eval(phi); }
};

namespace detail {

inline void check_curve_positive(const HarmonicCoefficients& curve,
                                 const std::string& name, std::size_t grid_points) {
  const DirectionGrid grid = DirectionGrid::uniform(grid_points);
  for (double phi : grid.angles) {
    const double v = curve.eval(phi);
    if (!(v > 0.0)) {
      throw InvalidCurveError(name, phi, v);
    }
  }
}

inline std::size_t resolve_bin_count(const BinningSpec& spec, std::size_t n,
                                     std::size_t max_order) {
  if (spec.n_bins != 0) return spec.n_bins;
  const auto auto_bins = static_cast<std::size_t>(
      std::lround(static_cast<double>(n) / 200.0));
  return std::max(auto_bins, 2 * max_order + 2);
}

}  // namespace detail

/// Fit the full directional Weibull model: bin, per-bin MLE, then one weighted
/// harmonic regression per parameter with weights 1/se^2. Both fitted curves
/// must be strictly positive on the standard direction grid.
inline DirectionalWeibullModel bwhr_fit(std::span<const WindSample> samples,
                                        BinningSpec spec = {},
                                        std::size_t k_alpha = 8,
                                        std::size_t k_beta = 8,
                                        std::size_t positivity_grid = 629) {
  if (samples.empty()) throw InsufficientDataError("bwhr_fit on empty sample");
  const std::size_t max_order = std::max(k_alpha, k_beta);
  spec.n_bins = detail::resolve_bin_count(spec, samples.size(), max_order);
  if (spec.n_bins < 2 * max_order + 2) {
    throw InsufficientBinsError("n_bins=" + std::to_string(spec.n_bins) +
                                " is below 2K+2=" + std::to_string(2 * max_order + 2));
  }

  const std::vector<DirectionBin> bins = bin_directions(samples, spec);
  FitBinsResult fitted = fit_bins(bins, 5, 2 * max_order + 2, spec.summary);

  std::vector<HarmonicPoint> alpha_pts, beta_pts;
  alpha_pts.reserve(fitted.fits.size());
  beta_pts.reserve(fitted.fits.size());
  for (const BinFit& bf : fitted.fits) {
    const double phi = bf.summary_angle.radians();
    alpha_pts.push_back({phi, bf.fit.params.shape, 1.0 / (bf.fit.se_shape * bf.fit.se_shape)});
    beta_pts.push_back({phi, bf.fit.params.scale, 1.0 / (bf.fit.se_scale * bf.fit.se_scale)});
  }

  DirectionalWeibullModel model;
  model.alpha_curve = harmonic_wls(alpha_pts, k_alpha);
  model.beta_curve = harmonic_wls(beta_pts, k_beta);
  model.binning = spec;
  model.bin_fits = std::move(fitted.fits);
  model.dropped_bins = std::move(fitted.dropped);
  detail::check_curve_positive(model.alpha_curve, "alpha", positivity_grid);
  detail::check_curve_positive(model.beta_curve, "beta", positivity_grid);
  return model;
}

inline double conditional_quantile(const DirectionalWeibullModel& model, Angle phi,
                                   double tau) {
  return weibull_quantile(tau, WeibullParams{model.alpha(phi.radians()),
                                             model.beta(phi.radians())});
}

/// Draw (u, v) pairs from the fitted joint law: direction from the mixture,
/// speed from the directional Weibull, then (u, v) = (r sin phi, r cos phi).
inline std::vector<UvPair> joint_simulate(const VonMisesMixtureModel& direction_model,
                                          const DirectionalWeibullModel& speed_model,
                                          std::size_t count, std::uint64_t seed) {
  const std::vector<Angle> phis =
      mixture_sample(direction_model, count, Rng::derive(seed, 0));
  Rng rng(Rng::derive(seed, 1));
  std::vector<UvPair> out;
  out.reserve(count);
  for (const Angle phi : phis) {
    const double a = speed_model.alpha(phi.radians());
    const double b = speed_model.beta(phi.radians());
    const double r = b * std::pow(-std::log(rng.uniform01_open()), 1.0 / a);
    out.push_back({r * std::sin(phi.radians()), r * std::cos(phi.radians())});
  }
  return out;
}

/// Rectangular evaluation lattice for the joint density.
struct Lattice2d {
  double u_min = 0.0, u_max = 0.0;
  double v_min = 0.0, v_max = 0.0;
  std::size_t nu = 0, nv = 0;

  double u_at(std::size_t i) const {
    return u_min + (u_max - u_min) * static_cast<double>(i) /
                       static_cast<double>(nu - 1);
  }
  double v_at(std::size_t j) const {
    return v_min + (v_max - v_min) * static_cast<double>(j) /
                       static_cast<double>(nv - 1);
  }
  double cell_area() const {
    return (u_max - u_min) / static_cast<double>(nu - 1) *
           (v_max - v_min) / static_cast<double>(nv - 1);
  }
};

struct DensitySurface {
  Lattice2d lattice;
  Eigen::MatrixXd values;  // (nu x nv); values(i, j) at (u_at(i), v_at(j))
};

namespace detail {

inline double silverman_bandwidth(std::vector<double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::sort(xs.begin(), xs.end());
  const auto quantile_at = [&xs](double q) {
    const double pos = q * (static_cast<double>(xs.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
  };
  const double iqr = quantile_at(0.75) - quantile_at(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  if (!(spread > 0.0)) {
    throw DegenerateSampleError("zero-variance axis in kernel density input");
  }
  return 0.9 * spread * std::pow(n, -0.2);
}

}  // namespace detail

/// Build a lattice covering the points with a margin of `pad` Silverman
/// bandwidths per axis.
inline Lattice2d lattice_covering(std::span<const UvPair> points, std::size_t nu,
                                  std::size_t nv, double pad = 4.0) {
  std::vector<double> us, vs;
  us.reserve(points.size());
  vs.reserve(points.size());
  for (const UvPair& p : points) {
    us.push_back(p.u);
    vs.push_back(p.v);
  }
  const double hu = detail::silverman_bandwidth(us);
  const double hv = detail::silverman_bandwidth(vs);
  const auto [u_lo, u_hi] = std::minmax_element(us.begin(), us.end());
  const auto [v_lo, v_hi] = std::minmax_element(vs.begin(), vs.end());
  return Lattice2d{*u_lo - pad * hu, *u_hi + pad * hu,
                   *v_lo - pad * hv, *v_hi + pad * hv, nu, nv};
}

/// Product-Gaussian kernel density on the lattice; bandwidth per axis by
/// Silverman's rule. Evaluated as an outer matrix product over the two axes.
inline DensitySurface joint_density_estimate(std::span<const UvPair> points,
                                             const Lattice2d& lattice) {
  if (points.size() < 100) {
    throw InsufficientDataError("kernel density needs at least 100 points, got " +
                                std::to_string(points.size()));
  }
  if (lattice.nu < 2 || lattice.nv < 2) {
    throw std::invalid_argument("lattice needs at least 2 points per axis");
  }
  std::vector<double> us, vs;
  us.reserve(points.size());
  vs.reserve(points.size());
  for (const UvPair& p : points) {
    us.push_back(p.u);
    vs.push_back(p.v);
  }
  const double hu = detail::silverman_bandwidth(us);
  const double hv = detail::silverman_bandwidth(vs);
  const double inv_norm_u = 1.0 / (hu * std::sqrt(kTwoPi));
  const double inv_norm_v = 1.0 / (hv * std::sqrt(kTwoPi));

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd ku(static_cast<Eigen::Index>(lattice.nu), n);
  for (std::size_t i = 0; i < lattice.nu; ++i) {
    const double ui = lattice.u_at(i);
    for (Eigen::Index p = 0; p < n; ++p) {
      const double z = (ui - us[static_cast<std::size_t>(p)]) / hu;
      ku(static_cast<Eigen::Index>(i), p) = inv_norm_u * std::exp(-0.5 * z * z);
    }
  }
  Eigen::MatrixXd kv(static_cast<Eigen::Index>(lattice.nv), n);
  for (std::size_t j = 0; j < lattice.nv; ++j) {
    const double vj = lattice.v_at(j);
    for (Eigen::Index p = 0; p < n; ++p) {
      const double z = (vj - vs[static_cast<std::size_t>(p)]) / hv;
      kv(static_cast<Eigen::Index>(j), p) = inv_norm_v * std::exp(-0.5 * z * z);
    }
  }
  DensitySurface surface;
  surface.lattice = lattice;
  surface.values = (ku * kv.transpose()) / static_cast<double>(points.size());
  return surface;
}

}  // namespace windcond
