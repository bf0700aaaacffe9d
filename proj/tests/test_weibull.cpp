#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "windcond/errors.hpp"
#include "windcond/quadrature.hpp"
#include "windcond/rng.hpp"
#include "windcond/weibull.hpp"

using windcond::WeibullParams;

TEST_CASE("weibull pdf reference values and unit mass") {
  CHECK(windcond::weibull_pdf(1.0, {1.0, 1.0}) ==
        Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
  // At r = scale the density is (shape/scale) * exp(-1) for any parameters.
  for (const auto& p : {WeibullParams{2.0, 8.0}, WeibullParams{0.7, 3.0},
                        WeibullParams{3.5, 12.0}}) {
    CHECK(windcond::weibull_pdf(p.scale, p) ==
          Catch::Approx(p.shape / p.scale * std::exp(-1.0)).epsilon(1e-12));
    const double upper = windcond::weibull_quantile(1.0 - 1e-13, p);
    const double mass = windcond::integrate(
        [&p](double r) { return windcond::weibull_pdf(r, p); }, 1e-12, upper);
    CHECK(mass == Catch::Approx(1.0).margin(1e-8));
  }
  CHECK_THROWS_AS(windcond::weibull_pdf(0.0, {1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(windcond::weibull_pdf(1.0, {0.0, 1.0}), std::domain_error);
}

TEST_CASE("weibull quantile closed forms") {
  CHECK(windcond::weibull_quantile(1.0 - std::exp(-1.0), {1.0, 1.0}) ==
        Catch::Approx(1.0).epsilon(1e-12));
  CHECK(windcond::weibull_quantile(0.5, {1.0, 1.0}) ==
        Catch::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(windcond::weibull_quantile(0.95, {2.0, 10.0}) ==
        Catch::Approx(17.3082).margin(5e-4));
  CHECK_THROWS_AS(windcond::weibull_quantile(0.0, {1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(windcond::weibull_quantile(1.0, {1.0, 1.0}), std::domain_error);
}

TEST_CASE("quantile and cdf invert each other") {
  for (const auto& p : {WeibullParams{2.0, 8.0}, WeibullParams{0.8, 2.5}}) {
    for (int i = 1; i <= 99; ++i) {
      const double tau = i / 100.0;
      CHECK(windcond::weibull_cdf(windcond::weibull_quantile(tau, p), p) ==
            Catch::Approx(tau).margin(1e-12));
    }
  }
}

TEST_CASE("sampling matches the analytic mean and the exponential special case") {
  const auto xs = windcond::weibull_sample({2.0, 8.0}, 100000, 31);
  // E[R] = scale * Gamma(1 + 1/shape) = 8 * Gamma(1.5).
  const double expected = 8.0 * std::tgamma(1.5);
  CHECK(oracle::mean(xs) == Catch::Approx(expected).epsilon(0.01));

  const auto es = windcond::weibull_sample({1.0, 1.0}, 100000, 32);
  const double d = oracle::ks_statistic(
      es, [](double x) { return -std::expm1(-x); });
  CHECK(d < 0.02);
}

TEST_CASE("maximum likelihood recovers simulation parameters") {
  const auto xs = windcond::weibull_sample({2.0, 8.0}, 10000, 7);
  const auto fit = windcond::weibull_mle(xs);
  CHECK(std::abs(fit.params.shape - 2.0) < 0.06);
  CHECK(std::abs(fit.params.scale - 8.0) < 0.15);
  CHECK(fit.n == 10000);

  // The fitted pair maximizes the log-likelihood locally.
  windcond::Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const WeibullParams perturbed{
        fit.params.shape * (1.0 + 0.02 * (rng.uniform01() - 0.5)),
        fit.params.scale * (1.0 + 0.02 * (rng.uniform01() - 0.5))};
    CHECK(windcond::weibull_loglik(xs, fit.params) >=
          windcond::weibull_loglik(xs, perturbed));
  }
}

TEST_CASE("score vanishes at the fitted parameters") {
  const auto xs = windcond::weibull_sample({2.0, 8.0}, 10000, 7);
  const auto fit = windcond::weibull_mle(xs);
  const double a = fit.params.shape;
  const double b = fit.params.scale;
  double d_alpha = static_cast<double>(xs.size()) / a;
  double d_beta = -static_cast<double>(xs.size()) * a / b;
  for (double r : xs) {
    const double lz = std::log(r / b);
    const double z = std::exp(a * lz);
    d_alpha += lz - z * lz;
    d_beta += (a / b) * z;
  }
  CHECK(std::hypot(d_alpha, d_beta) < 1e-6);
}

TEST_CASE("degenerate samples are rejected") {
  const std::vector<double> flat{1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(windcond::weibull_mle(flat),
                  windcond::DegenerateSampleError);
  const std::vector<double> tiny{1.0, 2.0};
  CHECK_THROWS_AS(windcond::weibull_mle(tiny),
                  windcond::InsufficientDataError);
}

TEST_CASE("fit is equivariant under rescaling of the data") {
  const auto xs = windcond::weibull_sample({1.7, 6.0}, 4000, 15);
  std::vector<double> scaled(xs);
  const double c = 3.25;
  for (double& r : scaled) r *= c;
  const auto base = windcond::weibull_mle(xs);
  const auto big = windcond::weibull_mle(scaled);
  CHECK(big.params.shape ==
        Catch::Approx(base.params.shape).epsilon(1e-8));
  CHECK(big.params.scale ==
        Catch::Approx(c * base.params.scale).epsilon(1e-8));
}

TEST_CASE("standard errors agree with a finite-difference hessian") {
  const auto xs = windcond::weibull_sample({2.0, 8.0}, 10000, 7);
  const auto fit = windcond::weibull_mle(xs);
  const double a = fit.params.shape;
  const double b = fit.params.scale;
  const double ha = 1e-3 * a;
  const double hb = 1e-3 * b;
  const auto ll = [&xs](double shape, double scale) {
    return windcond::weibull_loglik(xs, {shape, scale});
  };
  const double h_aa =
      (ll(a + ha, b) - 2.0 * ll(a, b) + ll(a - ha, b)) / (ha * ha);
  const double h_bb =
      (ll(a, b + hb) - 2.0 * ll(a, b) + ll(a, b - hb)) / (hb * hb);
  const double h_ab = (ll(a + ha, b + hb) - ll(a + ha, b - hb) -
                       ll(a - ha, b + hb) + ll(a - ha, b - hb)) /
                      (4.0 * ha * hb);
  const double det = h_aa * h_bb - h_ab * h_ab;
  const double se_shape_fd = std::sqrt(-h_bb / det);
  const double se_scale_fd = std::sqrt(-h_aa / det);
  CHECK(fit.se_shape == Catch::Approx(se_shape_fd).epsilon(1e-4));
  CHECK(fit.se_scale == Catch::Approx(se_scale_fd).epsilon(1e-4));
}
