#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windcond/angle.hpp"
#include "windcond/errors.hpp"
#include "windcond/types.hpp"

namespace windcond {

/// Cubic B-spline basis on [0, 2 pi) with df uniformly spaced knots and
/// periodic wrap, so every basis function is C2 across the seam.
struct PeriodicSplineBasis {
  std::size_t df = 18;

  void validate() const {
    if (df < 4) {
      throw std::invalid_argument("periodic cubic basis needs df >= 4");
    }
  }
};

/// The four basis functions active at one angle, as (index, value) pairs.
using SparseBasisRow = std::array<std::pair<std::size_t, double>, 4>;

/// Evaluate the active cubic segments at phi. Values are nonnegative and sum
/// to exactly 1 up to round-off (partition of unity).
inline SparseBasisRow pspline_basis_sparse(Angle phi, const PeriodicSplineBasis& basis) {
  basis.validate();
  const double df = static_cast<double>(basis.df);
  double x = phi.radians() / kTwoPi * df;
  auto cell = static_cast<std::size_t>(x);
  if (cell >= basis.df) cell = 0;  // phi just below 2 pi can round up
  const double s = x - static_cast<double>(cell);
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double omr = 1.0 - s;
  const auto wrap = [&](std::size_t offset_back) {
    return (cell + basis.df - offset_back) % basis.df;
  };
  return SparseBasisRow{{{wrap(3), omr * omr * omr / 6.0},
                         {wrap(2), (3.0 * s3 - 6.0 * s2 + 4.0) / 6.0},
                         {wrap(1), (-3.0 * s3 + 3.0 * s2 + 3.0 * s + 1.0) / 6.0},
                         {cell, s3 / 6.0}}};
}

inline std::vector<double> pspline_basis_eval(Angle phi, const PeriodicSplineBasis& basis) {
  std::vector<double> out(basis.df, 0.0);
  for (const auto& [idx, val] : pspline_basis_sparse(phi, basis)) {
    out[idx] += val;
  }
  return out;
}

/// Check-function loss rho_tau(y) = y (tau - 1{y<0}).
inline double pinball_loss(double residual, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error("quantile level must lie in (0,1)");
  }
  return residual >= 0.0 ? tau * residual : (tau - 1.0) * residual;
}

struct BpqrModel {
  double tau = 0.5;
  PeriodicSplineBasis basis;
  std::vector<double> coefficients;

  void validate() const {
    basis.validate();
    if (coefficients.size() != basis.df) {
      throw std::invalid_argument("coefficient count does not match basis df");
    }
  }
};

inline double bpqr_predict(const BpqrModel& model, Angle phi) {
  model.validate();
  double y = 0.0;
  for (const auto& [idx, val] : pspline_basis_sparse(phi, model.basis)) {
    y += val * model.coefficients[idx];
  }
  return y;
}

namespace detail {

struct IrlsResult {
  Eigen::VectorXd beta;
  // Smoothed objective after every iteration, one inner vector per
  // smoothing stage; non-increasing within each stage by construction.
  std::vector<std::vector<double>> stage_objectives;
  std::size_t iterations = 0;
};

/// Minimize sum_i rho_tau(y_i - x_i' beta) over beta for sparse rows x_i,
/// by iteratively reweighted least squares on the smoothed check function
///   rho_tau(e) ~ 0.5 sqrt(e^2 + eps^2) + (tau - 0.5) e,
/// annealing eps from eps_start down to eps_end by factors of ten. Each
/// iteration solves the majorizing weighted normal equations, so the smoothed
/// objective cannot increase.
inline IrlsResult smoothed_pinball_irls(
    const std::vector<std::vector<std::pair<std::size_t, double>>>& rows,
    std::span<const double> responses, double tau, std::size_t p,
    double eps_start = 1e-2, double eps_end = 1e-6,
    std::size_t max_total_iterations = 10000) {
  const std::size_t n = rows.size();
  const auto pe = static_cast<Eigen::Index>(p);

  // Warm start at the response tau-quantile spread over an intercept-capable
  // basis: constant fit via all-equal coefficients.
  std::vector<double> sorted(responses.begin(), responses.end());
  std::sort(sorted.begin(), sorted.end());
  const double q0 =
      sorted[std::min(n - 1, static_cast<std::size_t>(tau * static_cast<double>(n)))];

  IrlsResult out;
  out.beta = Eigen::VectorXd::Constant(pe, q0);

  std::vector<double> resid(n);
  const auto refresh_residuals = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      double fit = 0.0;
      for (const auto& [idx, val] : rows[i]) {
        fit += val * out.beta(static_cast<Eigen::Index>(idx));
      }
      resid[i] = responses[i] - fit;
    }
  };
  const auto smoothed_objective = [&](double eps) {
    double J = 0.0;
    for (double e : resid) {
      J += 0.5 * std::sqrt(e * e + eps * eps) + (tau - 0.5) * e;
    }
    return J;
  };

  refresh_residuals();
  for (double eps = eps_start; eps >= eps_end * (1.0 - 1e-12); eps *= 0.1) {
    out.stage_objectives.emplace_back();
    double prev = smoothed_objective(eps);
    for (;;) {
      if (out.iterations >= max_total_iterations) {
        throw ConvergenceError(
            "pinball IRLS exhausted " + std::to_string(max_total_iterations) +
                " iterations at eps=" + std::to_string(eps),
            std::vector<double>(out.beta.data(), out.beta.data() + out.beta.size()));
      }
      ++out.iterations;

      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(pe, pe);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pe);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 / std::sqrt(resid[i] * resid[i] + eps * eps);
        for (const auto& [ia, va] : rows[i]) {
          const auto ea = static_cast<Eigen::Index>(ia);
          rhs(ea) += (w * responses[i] + (tau - 0.5)) * va;
          for (const auto& [ib, vb] : rows[i]) {
            A(ea, static_cast<Eigen::Index>(ib)) += w * va * vb;
          }
        }
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
      qr.setThreshold(1e-12);
      if (qr.rank() < pe) {
        throw SingularDesignError("spline design is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " of " +
                                  std::to_string(p) + ")");
      }
      out.beta = qr.solve(rhs);
      refresh_residuals();
      const double J = smoothed_objective(eps);
      out.stage_objectives.back().push_back(J);
      if (prev - J < 1e-9 * (std::fabs(prev) + 1.0)) {
        break;
      }
      prev = J;
    }
  }
  return out;
}

}  // namespace detail

struct BpqrFitDetail {
  BpqrModel model;
  std::vector<std::vector<double>> stage_objectives;
  std::size_t iterations = 0;
};

inline BpqrFitDetail bpqr_fit_detail(std::span<const WindSample> samples, double tau,
                                     const PeriodicSplineBasis& basis = {}) {
  basis.validate();
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error("quantile level must lie in (0,1)");
  }
  if (samples.size() <= basis.df) {
    throw UnderdeterminedError("quantile regression with df=" + std::to_string(basis.df) +
                               " needs more than df observations, got " +
                               std::to_string(samples.size()));
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  rows.reserve(samples.size());
  std::vector<double> speeds;
  speeds.reserve(samples.size());
  for (const WindSample& s : samples) {
    const SparseBasisRow row = pspline_basis_sparse(s.direction, basis);
    rows.emplace_back(row.begin(), row.end());
    speeds.push_back(s.speed);
  }
  detail::IrlsResult irls =
      detail::smoothed_pinball_irls(rows, speeds, tau, basis.df);

  BpqrFitDetail out;
  out.model.tau = tau;
  out.model.basis = basis;
  out.model.coefficients.assign(irls.beta.data(), irls.beta.data() + irls.beta.size());
  out.stage_objectives = std::move(irls.stage_objectives);
  out.iterations = irls.iterations;
  return out;
}

inline BpqrModel bpqr_fit(std::span<const WindSample> samples, double tau,
                          const PeriodicSplineBasis& basis = {}) {
  return bpqr_fit_detail(samples, tau, basis).model;
}

}  // namespace windcond
