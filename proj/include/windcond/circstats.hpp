#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "windcond/angle.hpp"
#include "windcond/bessel.hpp"
#include "windcond/errors.hpp"
#include "windcond/rng.hpp"

namespace windcond {

struct VonMisesComponent {
  double weight = 1.0;
  Angle mu;
  double kappa = 0.0;  // nonnegative concentration
};

/// Finite von Mises mixture for the wind-direction marginal.
struct VonMisesMixtureModel {
  std::vector<VonMisesComponent> components;
  double loglik = 0.0;  // at the fitted parameters; 0 for hand-built models

  std::size_t count() const noexcept { return components.size(); }

  void validate() const {
    if (components.empty()) {
      throw std::invalid_argument("mixture needs at least one component");
    }
    double total = 0.0;
    for (const auto& c : components) {
      if (c.weight < 0.0) throw std::invalid_argument("negative mixture weight");
      if (c.kappa < 0.0) throw std::invalid_argument("negative concentration");
      total += c.weight;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("mixture weights sum to " + std::to_string(total));
    }
  }
};

/// von Mises density exp(kappa cos(phi-mu)) / (2 pi I0(kappa)), computed in
/// log space so large concentrations stay finite.
inline double vm_pdf(Angle phi, Angle mu, double kappa) {
  if (!(kappa >= 0.0)) {
    throw std::domain_error("concentration must be nonnegative");
  }
  const double lp = kappa * std::cos(phi.radians() - mu.radians()) -
                    std::log(kTwoPi) - log_bessel_i0(kappa);
  return std::exp(lp);
}

inline double mixture_pdf(Angle phi, const VonMisesMixtureModel& model) {
  double total = 0.0;
  for (const auto& c : model.components) {
    total += c.weight * vm_pdf(phi, c.mu, c.kappa);
  }
  return total;
}

/// Direction of the mean resultant vector; undefined (returns 0) only when the
/// resultant has length exactly zero.
inline Angle circular_mean(std::span<const Angle> angles) {
  if (angles.empty()) throw InsufficientDataError("circular_mean of empty set");
  double s = 0.0, c = 0.0;
  for (Angle a : angles) {
    s += std::sin(a.radians());
    c += std::cos(a.radians());
  }
  return normalize_angle(std::atan2(s, c));
}

/// Mean resultant length in [0, 1].
inline double resultant_length(std::span<const Angle> angles) {
  if (angles.empty()) throw InsufficientDataError("resultant_length of empty set");
  double s = 0.0, c = 0.0;
  for (Angle a : angles) {
    s += std::sin(a.radians());
    c += std::cos(a.radians());
  }
  return std::sqrt(s * s + c * c) / static_cast<double>(angles.size());
}

/// Minimizer, over the data points themselves, of the mean arc distance to the
/// sample; ties broken toward the smallest angle.
inline Angle circular_median(std::span<const Angle> angles) {
  if (angles.empty()) throw InsufficientDataError("circular_median of empty set");
  Angle best = angles[0];
  double best_cost = std::numeric_limits<double>::infinity();
  for (Angle cand : angles) {
    double cost = 0.0;
    for (Angle a : angles) cost += arc_distance(cand, a);
    if (cost < best_cost - 1e-12 ||
        (std::fabs(cost - best_cost) <= 1e-12 && cand < best)) {
      best_cost = cost;
      best = cand;
    }
  }
  return best;
}

namespace detail {

constexpr double kKappaCap = 1e4;

// k-means++ style seeding on the circle: first center uniform over the data,
// subsequent centers drawn with probability proportional to the squared arc
// distance to the nearest already-chosen center.
inline std::vector<double> kmeanspp_centers(std::span<const double> phis,
                                            std::size_t k, Rng& rng) {
  std::vector<double> centers;
  centers.reserve(k);
  centers.push_back(phis[rng.uniform_index(phis.size())]);
  std::vector<double> d2(phis.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (double c : centers) {
        nearest = std::min(nearest, arc_distance(phis[i], c));
      }
      d2[i] = nearest * nearest;
      total += d2[i];
    }
    if (total <= 0.0) {
      centers.push_back(phis[rng.uniform_index(phis.size())]);
      continue;
    }
    double target = rng.uniform01() * total;
    std::size_t pick = phis.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(phis[pick]);
  }
  return centers;
}

inline double logsumexp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// EM fit result with the per-iteration log-likelihood trace retained for
/// monotonicity checks and information-criterion computations.
struct EmResult {
  VonMisesMixtureModel model;
  std::vector<double> loglik_trace;
  int restarts = 0;
};

/// Expectation-maximization fit of an n_components von Mises mixture.
/// Input order does not matter: the angles are sorted internally before any
/// seeded choice is made. Deterministic given (inputs, seed).
inline EmResult em_fit_detail(std::span<const Angle> directions,
                              std::size_t n_components, std::uint64_t seed) {
  if (directions.empty()) {
    throw InsufficientDataError("em_fit on empty input");
  }
  if (n_components == 0) {
    throw std::invalid_argument("n_components must be positive");
  }
  const std::size_t n = directions.size();
  if (n < 10 * n_components) {
    throw InsufficientDataError("em_fit needs at least " +
                                std::to_string(10 * n_components) +
                                " observations for " + std::to_string(n_components) +
                                " components, got " + std::to_string(n));
  }

  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = directions[i].radians();
  std::sort(phi.begin(), phi.end());

  Rng rng(seed);
  const std::size_t k = n_components;
  const std::vector<double> centers = detail::kmeanspp_centers(phi, k, rng);

  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  std::vector<double> mu(centers);
  std::vector<double> kap(k, 1.0);

  // Hard-assignment warm start from the seeded centers.
  {
    std::vector<double> sum_s(k, 0.0), sum_c(k, 0.0), cnt(k, 0.0);
    for (double p : phi) {
      std::size_t best = 0;
      double bd = arc_distance(p, centers[0]);
      for (std::size_t j = 1; j < k; ++j) {
        const double d = arc_distance(p, centers[j]);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      sum_s[best] += std::sin(p);
      sum_c[best] += std::cos(p);
      cnt[best] += 1.0;
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (cnt[j] > 0.0) {
        mu[j] = std::atan2(sum_s[j], sum_c[j]);
        const double rbar = std::sqrt(sum_s[j] * sum_s[j] + sum_c[j] * sum_c[j]) / cnt[j];
        kap[j] = inv_bessel_ratio(std::min(rbar, 1.0 - 1e-12), detail::kKappaCap);
        w[j] = cnt[j] / static_cast<double>(n);
      }
    }
    double wsum = 0.0;
    for (double x : w) wsum += x;
    for (double& x : w) x /= wsum;
  }

  EmResult result;
  std::vector<double> resp(n * k);
  std::vector<double> row(k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  int restarts = 0;

  for (int iter = 0; iter < 500; ++iter) {
    // E-step in log space; logsumexp per observation accumulates the loglik.
    std::vector<double> log_norm(k);
    for (std::size_t j = 0; j < k; ++j) {
      log_norm[j] = std::log(std::max(w[j], 1e-300)) - std::log(kTwoPi) -
                    log_bessel_i0(kap[j]);
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        row[j] = log_norm[j] + kap[j] * std::cos(phi[i] - mu[j]);
      }
      const double lse = detail::logsumexp(row);
      ll += lse;
      for (std::size_t j = 0; j < k; ++j) {
        resp[i * k + j] = std::exp(row[j] - lse);
      }
    }
    result.loglik_trace.push_back(ll);

    // Collapse guard: a dead component is reseeded from a random datum.
    bool collapsed = false;
    std::vector<double> nj(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < n; ++i) nj[j] += resp[i * k + j];
      if (nj[j] < 1e-8) {
        if (++restarts > 10) {
          throw ComponentCollapseError(
              "EM component collapsed more than 10 times (k=" + std::to_string(k) + ")");
        }
        mu[j] = phi[rng.uniform_index(n)];
        kap[j] = 1.0;
        w[j] = 1.0 / static_cast<double>(n);
        collapsed = true;
      }
    }
    if (collapsed) {
      double wsum = 0.0;
      for (double x : w) wsum += x;
      for (double& x : w) x /= wsum;
      prev_ll = -std::numeric_limits<double>::infinity();
      result.loglik_trace.clear();  // trace covers the final uninterrupted run only
      continue;
    }

    if (ll - prev_ll < 1e-8 && iter > 0) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;

    // M-step: closed-form weight and mean updates, Newton-inverted A(kappa).
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0, c = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += resp[i * k + j] * std::sin(phi[i]);
        c += resp[i * k + j] * std::cos(phi[i]);
      }
      w[j] = nj[j] / static_cast<double>(n);
      mu[j] = std::atan2(s, c);
      const double rbar = std::sqrt(s * s + c * c) / nj[j];
      kap[j] = inv_bessel_ratio(std::min(rbar, 1.0 - 1e-16), detail::kKappaCap);
    }
  }

  VonMisesMixtureModel model;
  model.components.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    model.components.push_back({w[j], normalize_angle(mu[j]), kap[j]});
  }
  // Exact weight renormalization so the 1e-12 invariant holds after roundoff.
  double wsum = 0.0;
  for (const auto& c : model.components) wsum += c.weight;
  for (auto& c : model.components) c.weight /= wsum;
  std::sort(model.components.begin(), model.components.end(),
            [](const VonMisesComponent& a, const VonMisesComponent& b) {
              return a.mu < b.mu;
            });
  model.loglik = result.loglik_trace.back();
  result.model = std::move(model);
  result.restarts = restarts;
  return result;
}

inline VonMisesMixtureModel em_fit(std::span<const Angle> directions,
                                   std::size_t n_components, std::uint64_t seed) {
  return em_fit_detail(directions, n_components, seed).model;
}

inline double mixture_bic(const VonMisesMixtureModel& model, std::size_t n) {
  const double p = 3.0 * static_cast<double>(model.count()) - 1.0;
  return -2.0 * model.loglik + p * std::log(static_cast<double>(n));
}

/// Fit every candidate component count and keep the BIC minimizer; ties break
/// toward fewer components.
inline VonMisesMixtureModel select_components(std::span<const Angle> directions,
                                              std::uint64_t seed,
                                              std::size_t min_components = 1,
                                              std::size_t max_components = 6) {
  if (min_components == 0 || max_components < min_components) {
    throw std::invalid_argument("empty candidate range for component selection");
  }
  VonMisesMixtureModel best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t k = min_components; k <= max_components; ++k) {
    VonMisesMixtureModel cand =
        em_fit(directions, k, Rng::derive(seed, k));
    const double bic = mixture_bic(cand, directions.size());
    if (bic < best_bic - 1e-9) {  // strict improvement required: ties keep smaller k
      best_bic = bic;
      best = std::move(cand);
    }
  }
  return best;
}

namespace detail {

// Best-Fisher rejection sampler for one von Mises deviate centred at 0.
inline double vm_deviate(double kappa, Rng& rng) {
  if (kappa < 1e-8) {
    return rng.uniform(0.0, kTwoPi);
  }
  const double a = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double b = (a - std::sqrt(2.0 * a)) / (2.0 * kappa);
  const double r0 = (1.0 + b * b) / (2.0 * b);
  for (;;) {
    const double u1 = rng.uniform01_open();
    const double z = std::cos(std::numbers::pi * u1);
    const double f = (1.0 + r0 * z) / (r0 + z);
    const double c = kappa * (r0 - f);
    const double u2 = rng.uniform01_open();
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double u3 = rng.uniform01();
      const double sign = (u3 < 0.5) ? -1.0 : 1.0;
      return sign * std::acos(std::clamp(f, -1.0, 1.0));
    }
  }
}

}  // namespace detail

/// i.i.d. draws from the mixture; component chosen by weight, angle by
/// rejection sampling. Deterministic given seed.
inline std::vector<Angle> mixture_sample(const VonMisesMixtureModel& model,
                                         std::size_t count, std::uint64_t seed) {
  model.validate();
  Rng rng(seed);
  std::vector<Angle> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double u = rng.uniform01();
    std::size_t j = 0;
    double acc = model.components[0].weight;
    while (u > acc && j + 1 < model.components.size()) {
      ++j;
      acc += model.components[j].weight;
    }
    const auto& comp = model.components[j];
    const double dev = detail::vm_deviate(comp.kappa, rng);
    out.push_back(normalize_angle(comp.mu.radians() + dev));
  }
  return out;
}

}  // namespace windcond
