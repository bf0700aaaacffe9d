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
#include "windcond/bpqr.hpp"
#include "windcond/bwhr.hpp"
#include "windcond/circstats.hpp"
#include "windcond/errors.hpp"
#include "windcond/estimators.hpp"
#include "windcond/metrics.hpp"
#include "windcond/parallel.hpp"
#include "windcond/quadrature.hpp"
#include "windcond/rng.hpp"
#include "windcond/types.hpp"

namespace windcond {

/// Polar wind observation without a year label.
struct RPhi {
  double r = 0.0;
  Angle phi;
};

/// The direction angle is measured from the +v axis, so phi = atan2(u, v)
/// and (u, v) = (r sin phi, r cos phi).
inline RPhi to_polar(double u, double v) {
  if (!std::isfinite(u) || !std::isfinite(v)) {
    throw std::domain_error("wind components must be finite");
  }
  if (u == 0.0 && v == 0.0) {
    return RPhi{0.0, Angle{}};
  }
  return RPhi{std::hypot(u, v), normalize_angle(std::atan2(u, v))};
}

inline UvPair to_cartesian(double r, Angle phi) {
  if (!(r >= 0.0)) {
    throw std::domain_error("speed must be nonnegative");
  }
  return UvPair{r * std::sin(phi.radians()), r * std::cos(phi.radians())};
}

struct GaussianComponent {
  double weight = 1.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

/// Bivariate normal mixture playing the role of the data-generating truth in
/// simulation studies.
struct GaussianMixtureTruth {
  std::vector<GaussianComponent> components;

  void validate() const {
    if (components.empty()) {
      throw std::invalid_argument("truth mixture needs at least one component");
    }
    double total = 0.0;
    for (const auto& c : components) {
      if (c.weight < 0.0) throw std::invalid_argument("negative mixture weight");
      total += c.weight;
      if (std::fabs(c.cov(0, 1) - c.cov(1, 0)) > 1e-9) {
        throw std::invalid_argument("covariance must be symmetric");
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c.cov);
      if (es.eigenvalues().minCoeff() <= 1e-10) {
        throw std::invalid_argument("covariance must be positive definite");
      }
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("truth weights sum to " + std::to_string(total));
    }
  }

  double pdf(double u, double v) const {
    double total = 0.0;
    for (const auto& c : components) {
      const double a = c.cov(0, 0), b = c.cov(1, 1), off = c.cov(0, 1);
      const double det = a * b - off * off;
      const double du = u - c.mean(0);
      const double dv = v - c.mean(1);
      const double quad = (b * du * du - 2.0 * off * du * dv + a * dv * dv) / det;
      total += c.weight / (kTwoPi * std::sqrt(det)) * std::exp(-0.5 * quad);
    }
    return total;
  }

  /// Radial truncation point for quadrature over speed: beyond the farthest
  /// mean plus ten standard deviations the Gaussian mass is negligible.
  double radial_limit() const {
    double max_mean = 0.0;
    double max_spectral = 0.0;
    for (const auto& c : components) {
      max_mean = std::max(max_mean, c.mean.norm());
      const double a = c.cov(0, 0), b = c.cov(1, 1), off = c.cov(0, 1);
      const double lam =
          0.5 * (a + b) + std::sqrt(0.25 * (a - b) * (a - b) + off * off);
      max_spectral = std::max(max_spectral, lam);
    }
    return max_mean + 10.0 * std::sqrt(max_spectral);
  }
};

/// Draw count samples; year labels are assigned in equal consecutive runs of
/// count/years, any remainder landing in the last year.
inline std::vector<WindSample> truth_sample(const GaussianMixtureTruth& truth,
                                            std::size_t count, std::size_t years,
                                            std::uint64_t seed) {
  truth.validate();
  if (years == 0) throw std::invalid_argument("need at least one year label");
  // Per-component Cholesky factors, computed once.
  std::vector<Eigen::Matrix2d> chol;
  chol.reserve(truth.components.size());
  for (const auto& c : truth.components) {
    chol.push_back(Eigen::Matrix2d(c.cov.llt().matrixL()));
  }
  Rng rng(seed);
  const std::size_t per_year = std::max<std::size_t>(count / years, 1);
  std::vector<WindSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double u01 = rng.uniform01();
    std::size_t j = 0;
    double acc = truth.components[0].weight;
    while (u01 > acc && j + 1 < truth.components.size()) {
      ++j;
      acc += truth.components[j].weight;
    }
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d x = truth.components[j].mean + chol[j] * z;
    const RPhi polar = to_polar(x(0), x(1));
    const auto year = static_cast<int>(std::min(i / per_year, years - 1)) + 1;
    out.push_back(WindSample{polar.r, polar.phi, year});
  }
  return out;
}

/// Direction density of the truth: f_Phi(phi) = integral_0^inf r f_UV(r sin
/// phi, r cos phi) dr, truncated at the radial limit.
inline double truth_direction_density(const GaussianMixtureTruth& truth, Angle phi,
                                      double abs_tol = 1e-9) {
  const double sphi = std::sin(phi.radians());
  const double cphi = std::cos(phi.radians());
  const double limit = truth.radial_limit();
  return integrate([&](double r) { return r * truth.pdf(r * sphi, r * cphi); }, 0.0,
                   limit, QuadratureOptions{abs_tol, 4000});
}

/// Conditional CDF of speed given direction, F(r | phi), by direct quadrature.
inline double truth_conditional_cdf(const GaussianMixtureTruth& truth, Angle phi,
                                    double r) {
  const double sphi = std::sin(phi.radians());
  const double cphi = std::cos(phi.radians());
  const double limit = truth.radial_limit();
  const auto integrand = [&](double s) { return s * truth.pdf(s * sphi, s * cphi); };
  const QuadratureOptions opts{1e-12, 4000};
  const double normalizer = integrate(integrand, 0.0, limit, opts);
  if (!(normalizer > 0.0)) {
    throw QuadratureError("conditional distribution has no mass along direction " +
                          std::to_string(phi.radians()));
  }
  if (r <= 0.0) return 0.0;
  if (r >= limit) return 1.0;
  return integrate(integrand, 0.0, r, opts) / normalizer;
}

/// Conditional speed quantile by bisection on the conditional CDF. This is
/// the brute-force oracle the simulation metrics are scored against.
inline double truth_conditional_quantile(const GaussianMixtureTruth& truth, Angle phi,
                                         double tau, double r_tol = 1e-8) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error("quantile level must lie in (0,1)");
  }
  const double sphi = std::sin(phi.radians());
  const double cphi = std::cos(phi.radians());
  const double limit = truth.radial_limit();
  const auto integrand = [&](double s) { return s * truth.pdf(s * sphi, s * cphi); };
  const QuadratureOptions opts{1e-12, 4000};
  const double normalizer = integrate(integrand, 0.0, limit, opts);
  if (!(normalizer > 0.0)) {
    throw QuadratureError("conditional distribution has no mass along direction " +
                          std::to_string(phi.radians()));
  }
  double lo = 0.0, hi = limit;
  // 0.5 * (lo + hi) halves the bracket every step; the accumulated-integral
  // form keeps each step to one fresh quadrature over the new half.
  double cdf_lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > r_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double cdf_mid = cdf_lo + integrate(integrand, lo, mid, opts) / normalizer;
    if (cdf_mid < tau) {
      lo = mid;
      cdf_lo = cdf_mid;
    } else {
      hi = mid;
    }
  }
  if (hi - lo > r_tol) {
    throw QuadratureError("conditional quantile bisection failed to converge");
  }
  return 0.5 * (lo + hi);
}

/// Truth curves discretized on a grid; computed once per truth and reused by
/// every replicate of a study.
struct TruthCurves {
  CurveSample density;
  std::vector<double> taus;
  std::vector<CurveSample> quantiles;  // one curve per tau
};

inline TruthCurves truth_curves(const GaussianMixtureTruth& truth,
                                const DirectionGrid& grid, std::span<const double> taus,
                                std::size_t threads = 1) {
  truth.validate();
  TruthCurves out;
  out.density.grid = grid;
  out.density.values.resize(grid.size());
  out.taus.assign(taus.begin(), taus.end());
  out.quantiles.resize(taus.size());
  for (auto& q : out.quantiles) {
    q.grid = grid;
    q.values.resize(grid.size());
  }
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const Angle phi = normalize_angle(grid.angles[i]);
    out.density.values[i] = truth_direction_density(truth, phi);
    for (std::size_t t = 0; t < out.taus.size(); ++t) {
      out.quantiles[t].values[i] = truth_conditional_quantile(truth, phi, out.taus[t]);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Bivariate Gaussian mixture EM, for fitting a truth specification to (u, v)
// observations.

struct GmmFitResult {
  GaussianMixtureTruth mixture;
  double loglik = 0.0;
};

namespace detail {

inline Eigen::Matrix2d regularize_covariance(Eigen::Matrix2d cov, double floor = 1e-6) {
  cov = 0.5 * (cov + cov.transpose().eval());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Eigen::Vector2d lam = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// EM fit of a k-component bivariate Gaussian mixture with an eigenvalue floor
/// of 1e-6 on every covariance update. Deterministic given seed.
inline GmmFitResult gmm_fit(std::span<const UvPair> points, std::size_t k,
                            std::uint64_t seed) {
  const std::size_t n = points.size();
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (n < 10 * k) {
    throw InsufficientDataError("gmm_fit needs at least " + std::to_string(10 * k) +
                                " points for " + std::to_string(k) + " components");
  }
  std::vector<Eigen::Vector2d> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = Eigen::Vector2d(points[i].u, points[i].v);

  Rng rng(seed);
  // k-means++ seeding in the plane.
  std::vector<Eigen::Vector2d> centers;
  centers.push_back(x[rng.uniform_index(n)]);
  while (centers.size() < k) {
    std::vector<double> d2(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) nearest = std::min(nearest, (x[i] - c).squaredNorm());
      d2[i] = nearest;
      total += nearest;
    }
    double target = rng.uniform01() * total;
    std::size_t pick = n - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(x[pick]);
  }

  Eigen::Vector2d grand_mean = Eigen::Vector2d::Zero();
  for (const auto& xi : x) grand_mean += xi;
  grand_mean /= static_cast<double>(n);
  Eigen::Matrix2d grand_cov = Eigen::Matrix2d::Zero();
  for (const auto& xi : x) grand_cov += (xi - grand_mean) * (xi - grand_mean).transpose();
  grand_cov = detail::regularize_covariance(grand_cov / static_cast<double>(n));

  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  std::vector<Eigen::Vector2d> mu(centers);
  std::vector<Eigen::Matrix2d> sigma(k, grand_cov);

  std::vector<double> resp(n * k);
  std::vector<double> row(k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  double ll = prev_ll;
  int restarts = 0;

  for (int iter = 0; iter < 500; ++iter) {
    std::vector<Eigen::Matrix2d> prec(k);
    std::vector<double> log_norm(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double det = sigma[j].determinant();
      prec[j] = sigma[j].inverse();
      log_norm[j] = std::log(std::max(w[j], 1e-300)) - std::log(kTwoPi) -
                    0.5 * std::log(det);
    }
    ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const Eigen::Vector2d d = x[i] - mu[j];
        row[j] = log_norm[j] - 0.5 * d.dot(prec[j] * d);
      }
      const double lse = detail::logsumexp(row);
      ll += lse;
      for (std::size_t j = 0; j < k; ++j) resp[i * k + j] = std::exp(row[j] - lse);
    }

    bool collapsed = false;
    std::vector<double> nj(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < n; ++i) nj[j] += resp[i * k + j];
      if (nj[j] < 1e-8) {
        if (++restarts > 10) {
          throw ComponentCollapseError("Gaussian mixture EM collapsed more than 10 times");
        }
        mu[j] = x[rng.uniform_index(n)];
        sigma[j] = grand_cov;
        w[j] = 1.0 / static_cast<double>(n);
        collapsed = true;
      }
    }
    if (collapsed) {
      double wsum = 0.0;
      for (double v : w) wsum += v;
      for (double& v : w) v /= wsum;
      prev_ll = -std::numeric_limits<double>::infinity();
      continue;
    }

    if (ll - prev_ll < 1e-8 && iter > 0) break;
    prev_ll = ll;

    for (std::size_t j = 0; j < k; ++j) {
      Eigen::Vector2d m = Eigen::Vector2d::Zero();
      for (std::size_t i = 0; i < n; ++i) m += resp[i * k + j] * x[i];
      m /= nj[j];
      Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d d = x[i] - m;
        s += resp[i * k + j] * d * d.transpose();
      }
      w[j] = nj[j] / static_cast<double>(n);
      mu[j] = m;
      sigma[j] = detail::regularize_covariance(s / nj[j]);
    }
  }

  GmmFitResult out;
  out.mixture.components.resize(k);
  double wsum = 0.0;
  for (double v : w) wsum += v;
  for (std::size_t j = 0; j < k; ++j) {
    out.mixture.components[j] = {w[j] / wsum, mu[j], sigma[j]};
  }
  std::sort(out.mixture.components.begin(), out.mixture.components.end(),
            [](const GaussianComponent& a, const GaussianComponent& b) {
              return a.weight > b.weight;
            });
  out.loglik = ll;
  return out;
}

/// BIC selection of the Gaussian-mixture component count over [kmin, kmax];
/// free parameters per k: (k-1) weights + 2k means + 3k covariances.
inline GmmFitResult gmm_select(std::span<const UvPair> points, std::uint64_t seed,
                               std::size_t kmin = 1, std::size_t kmax = 9) {
  if (kmin == 0 || kmax < kmin) {
    throw std::invalid_argument("empty candidate range for mixture selection");
  }
  GmmFitResult best;
  double best_bic = std::numeric_limits<double>::infinity();
  const double logn = std::log(static_cast<double>(points.size()));
  for (std::size_t k = kmin; k <= kmax; ++k) {
    GmmFitResult cand = gmm_fit(points, k, Rng::derive(seed, k));
    const double p = 6.0 * static_cast<double>(k) - 1.0;
    const double bic = -2.0 * cand.loglik + p * logn;
    if (bic < best_bic - 1e-9) {
      best_bic = bic;
      best = std::move(cand);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Monte Carlo study harness.

struct StudyConfig {
  std::size_t n = 7360;
  std::size_t replicates = 500;
  std::size_t years = 10;
  std::vector<double> taus{0.5, 0.75, 0.95};
  std::size_t grid_size = 629;
  EstimatorSettings estimators{};
  std::string location = "synthetic";
  std::size_t threads = 1;
};

struct MetricRecord {
  std::size_t replicate = 0;
  std::string location;
  std::string metric;
  std::string estimator;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
};

struct StudyResult {
  std::vector<MetricRecord> records;
  std::vector<std::string> failures;
  bool failure_flagged = false;  // more than 5% of replicates hit an estimator error
};

namespace detail {

struct ReplicateOutput {
  std::vector<MetricRecord> records;
  std::vector<std::string> failures;
};

}  // namespace detail

/// One full simulation study: per replicate, draw data from the truth(s), fit
/// the direction mixture plus both speed estimators, and score every fitted
/// curve against the cached numeric oracles. With a future truth present the
/// study also scores quantile-difference estimates. Deterministic given seed;
/// thread count does not affect output.
inline StudyResult run_study(const GaussianMixtureTruth& truth_present,
                             const std::optional<GaussianMixtureTruth>& truth_future,
                             const StudyConfig& config, std::uint64_t seed) {
  truth_present.validate();
  if (truth_future) truth_future->validate();

  const DirectionGrid grid = DirectionGrid::uniform(config.grid_size);
  const TruthCurves present_truth =
      truth_curves(truth_present, grid, config.taus, config.threads);
  std::optional<TruthCurves> future_truth;
  if (truth_future) {
    future_truth = truth_curves(*truth_future, grid, config.taus, config.threads);
  }

  // Relative difference metrics are only meaningful when the true difference
  // curve is bounded away from zero everywhere the weight is positive.
  std::vector<bool> qdiff_relative_ok(config.taus.size(), false);
  if (future_truth) {
    for (std::size_t t = 0; t < config.taus.size(); ++t) {
      double min_abs = std::numeric_limits<double>::infinity();
      double scale = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d =
            future_truth->quantiles[t].values[i] - present_truth.quantiles[t].values[i];
        min_abs = std::min(min_abs, std::fabs(d));
        scale = std::max(scale, std::fabs(present_truth.quantiles[t].values[i]));
      }
      qdiff_relative_ok[t] = min_abs > 1e-6 * (scale + 1.0);
    }
  }

  std::vector<detail::ReplicateOutput> slots(config.replicates);
  parallel_for(config.replicates, config.threads, [&](std::size_t r) {
    detail::ReplicateOutput& slot = slots[r];
    const std::uint64_t rep_seed = seed + r;
    const auto record = [&](std::string metric, std::string estimator, double tau,
                            double value) {
      slot.records.push_back(MetricRecord{r, config.location, std::move(metric),
                                          std::move(estimator), tau, value});
    };
    const auto record_failure = [&](const std::string& stage, const std::exception& e) {
      slot.failures.push_back("replicate " + std::to_string(r) + " " + stage + ": " +
                              e.what());
    };

    const std::vector<WindSample> present =
        truth_sample(truth_present, config.n, config.years, Rng::derive(rep_seed, 1));
    std::vector<Angle> directions;
    directions.reserve(present.size());
    for (const WindSample& s : present) directions.push_back(s.direction);

    try {
      const VonMisesMixtureModel vm = select_components(
          directions, Rng::derive(rep_seed, 2), config.estimators.vm_min_components,
          config.estimators.vm_max_components);
      const CurveSample density = curve_from_mixture(vm, grid);
      record("wimre_density", "vonmises", std::numeric_limits<double>::quiet_NaN(),
             wimre(density, present_truth.density, present_truth.density));
    } catch (const std::exception& e) {
      record_failure("vonmises", e);
    }

    std::optional<DirectionalWeibullModel> bwhr_present;
    try {
      bwhr_present = bwhr_fit(present, config.estimators.binning,
                              config.estimators.k_alpha, config.estimators.k_beta,
                              config.grid_size);
    } catch (const std::exception& e) {
      record_failure("bwhr", e);
    }

    std::vector<std::optional<CurveSample>> bwhr_curves(config.taus.size());
    std::vector<std::optional<CurveSample>> bpqr_curves(config.taus.size());
    for (std::size_t t = 0; t < config.taus.size(); ++t) {
      const double tau = config.taus[t];
      if (bwhr_present) {
        bwhr_curves[t] = curve_from_bwhr(*bwhr_present, grid, tau);
        record("wimre_quantile", "bwhr", tau,
               wimre(*bwhr_curves[t], present_truth.quantiles[t], present_truth.density));
      }
      try {
        const BpqrModel model = bpqr_fit(present, tau, config.estimators.basis);
        bpqr_curves[t] = curve_from_bpqr(model, grid);
        record("wimre_quantile", "bpqr", tau,
               wimre(*bpqr_curves[t], present_truth.quantiles[t], present_truth.density));
      } catch (const std::exception& e) {
        record_failure("bpqr tau=" + std::to_string(tau), e);
      }
    }

    if (!truth_future) return;

    const std::vector<WindSample> future =
        truth_sample(*truth_future, config.n, config.years, Rng::derive(rep_seed, 3));
    std::optional<DirectionalWeibullModel> bwhr_future;
    try {
      bwhr_future = bwhr_fit(future, config.estimators.binning,
                             config.estimators.k_alpha, config.estimators.k_beta,
                             config.grid_size);
    } catch (const std::exception& e) {
      record_failure("bwhr future", e);
    }

    for (std::size_t t = 0; t < config.taus.size(); ++t) {
      const double tau = config.taus[t];
      CurveSample truth_diff;
      truth_diff.grid = grid;
      truth_diff.values.resize(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        truth_diff.values[i] = future_truth->quantiles[t].values[i] -
                               present_truth.quantiles[t].values[i];
      }

      const auto score_difference = [&](const std::string& estimator,
                                        const CurveSample& fit_present,
                                        const CurveSample& fit_future) {
        CurveSample diff;
        diff.grid = grid;
        diff.values.resize(grid.size());
        double mean_diff = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
          diff.values[i] = fit_future.values[i] - fit_present.values[i];
          mean_diff += diff.values[i];
        }
        record("mean_qdiff", estimator, tau,
               mean_diff / static_cast<double>(grid.size()));
        if (qdiff_relative_ok[t]) {
          record("wimre_qdiff", estimator, tau,
                 wimre(diff, truth_diff, present_truth.density));
          double num = 0.0, den = 0.0;
          for (std::size_t i = 0; i < grid.size(); ++i) {
            const double f = present_truth.density.values[i];
            num += f * (diff.values[i] - truth_diff.values[i]) / truth_diff.values[i];
            den += f;
          }
          record("signed_mrd_qdiff", estimator, tau, num / den);
        }
      };

      if (bwhr_present && bwhr_future && bwhr_curves[t]) {
        score_difference("bwhr", *bwhr_curves[t],
                         curve_from_bwhr(*bwhr_future, grid, tau));
      }
      if (bpqr_curves[t]) {
        try {
          const BpqrModel model = bpqr_fit(future, tau, config.estimators.basis);
          score_difference("bpqr", *bpqr_curves[t],
                           curve_from_bpqr(model, grid));
        } catch (const std::exception& e) {
          record_failure("bpqr future tau=" + std::to_string(tau), e);
        }
      }
    }
  });

  StudyResult result;
  std::size_t failed_replicates = 0;
  for (auto& slot : slots) {
    result.records.insert(result.records.end(),
                          std::make_move_iterator(slot.records.begin()),
                          std::make_move_iterator(slot.records.end()));
    if (!slot.failures.empty()) ++failed_replicates;
    result.failures.insert(result.failures.end(),
                           std::make_move_iterator(slot.failures.begin()),
                           std::make_move_iterator(slot.failures.end()));
  }
  result.failure_flagged =
      failed_replicates * 20 > config.replicates;  // strictly above 5%
  return result;
}

}  // namespace windcond
