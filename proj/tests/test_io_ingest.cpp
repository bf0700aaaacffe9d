#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "windcond/errors.hpp"
#include "windcond/io.hpp"
#include "windcond/rng.hpp"

using windcond::Angle;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  windcond::write_text_file(path, content);
  return path;
}

}  // namespace

TEST_CASE("number formatting round-trips exactly") {
  windcond::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-8.0, 8.0));
    const auto parsed = windcond::parse_double(windcond::format_double(x));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == x);
  }
  CHECK(!windcond::parse_double("not-a-number").has_value());
  CHECK(!windcond::parse_double("").has_value());
}

TEST_CASE("direction-model json round-trips") {
  windcond::VonMisesMixtureModel model;
  model.components.push_back({0.6, Angle::from_radians(1.25), 4.5});
  model.components.push_back({0.4, Angle::from_radians(4.0), 0.75});
  model.loglik = -1234.5;
  const auto j = windcond::vonmises_to_json(model);
  CHECK(j.contains("weights"));
  CHECK(j.contains("mus_rad"));
  CHECK(j.contains("kappas"));
  const auto back = windcond::vonmises_from_json(j);
  REQUIRE(back.components.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.components[i].weight == model.components[i].weight);
    CHECK(back.components[i].mu.radians() == model.components[i].mu.radians());
    CHECK(back.components[i].kappa == model.components[i].kappa);
  }
}

TEST_CASE("speed-model json round-trips") {
  windcond::DirectionalWeibullModel model;
  model.alpha_curve.intercept = 2.0;
  model.alpha_curve.pairs = {{0.5, -0.25}, {0.1, 0.05}};
  model.beta_curve.intercept = 8.0;
  model.beta_curve.pairs = {{2.0, 1.0}};
  model.binning.n_bins = 24;
  model.binning.scheme = windcond::BinScheme::EqualFrequency;
  const auto j = windcond::bwhr_to_json(model);
  CHECK(j["K_alpha"] == 2);
  CHECK(j["K_beta"] == 1);
  const auto back = windcond::bwhr_from_json(j);
  CHECK(back.alpha_curve.intercept == model.alpha_curve.intercept);
  CHECK(back.alpha_curve.pairs == model.alpha_curve.pairs);
  CHECK(back.beta_curve.intercept == model.beta_curve.intercept);
  CHECK(back.beta_curve.pairs == model.beta_curve.pairs);
  CHECK(back.binning.n_bins == 24);
  CHECK(back.binning.scheme == windcond::BinScheme::EqualFrequency);
}

TEST_CASE("truth json round-trips") {
  windcond::GaussianMixtureTruth truth;
  windcond::GaussianComponent a, b;
  a.weight = 0.7;
  a.mean << 1.0, -2.0;
  a.cov << 2.0, 0.5, 0.5, 3.0;
  b.weight = 0.3;
  b.mean << -0.5, 1.5;
  b.cov << 1.0, -0.2, -0.2, 1.5;
  truth.components = {a, b};
  const auto back = windcond::truth_from_json(windcond::truth_to_json(truth));
  REQUIRE(back.components.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.components[i].weight == truth.components[i].weight);
    CHECK(back.components[i].mean == truth.components[i].mean);
    CHECK(back.components[i].cov == truth.components[i].cov);
  }
}

TEST_CASE("curve csv export parses back without loss") {
  const auto grid = windcond::DirectionGrid::uniform(33);
  const std::vector<double> taus{0.5, 0.75, 0.95};
  std::vector<windcond::CurveSample> curves;
  windcond::Rng rng(2);
  for (std::size_t t = 0; t < taus.size(); ++t) {
    windcond::CurveSample c;
    c.grid = grid;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      c.values.push_back(5.0 + rng.uniform01());
    }
    curves.push_back(std::move(c));
  }
  const std::string text = windcond::curves_csv(grid, taus, curves);
  const auto path = temp_file("windcond_curves_test.csv", text);
  const auto table = windcond::read_csv(path);
  REQUIRE(table.headers ==
          std::vector<std::string>{"phi_rad", "phi_deg", "q50", "q75", "q95"});
  REQUIRE(table.rows.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(*windcond::parse_double(table.rows[i][0]) == grid.angles[i]);
    CHECK(*windcond::parse_double(table.rows[i][1]) ==
          Catch::Approx(grid.angles[i] * 180.0 / std::numbers::pi).margin(1e-12));
    for (std::size_t t = 0; t < taus.size(); ++t) {
      CHECK(*windcond::parse_double(table.rows[i][2 + t]) == curves[t].values[i]);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("quantile level labels") {
  CHECK(windcond::curve_level_label(0.5) == "q50");
  CHECK(windcond::curve_level_label(0.75) == "q75");
  CHECK(windcond::curve_level_label(0.95) == "q95");
  CHECK(windcond::curve_level_label(0.975) == "q97.5");
}

TEST_CASE("band csv carries bounds and level") {
  windcond::BootstrapBand band;
  band.grid = windcond::DirectionGrid::uniform(5);
  band.estimate = {1.0, 2.0, 3.0, 4.0, 5.0};
  band.lower = {0.5, 1.5, 2.5, 3.5, 4.5};
  band.upper = {1.5, 2.5, 3.5, 4.5, 5.5};
  band.level = 0.95;
  const auto path = temp_file("windcond_band_test.csv", windcond::band_csv(band));
  const auto table = windcond::read_csv(path);
  REQUIRE(table.headers ==
          std::vector<std::string>{"phi_rad", "estimate", "lower", "upper", "level"});
  REQUIRE(table.rows.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(*windcond::parse_double(table.rows[i][1]) == band.estimate[i]);
    CHECK(*windcond::parse_double(table.rows[i][2]) == band.lower[i]);
    CHECK(*windcond::parse_double(table.rows[i][3]) == band.upper[i]);
    CHECK(*windcond::parse_double(table.rows[i][4]) == 0.95);
  }
  std::filesystem::remove(path);
}

TEST_CASE("study records serialize with empty tau for density metrics") {
  std::vector<windcond::MetricRecord> records;
  records.push_back({0, "siteA", "wimre_density", "vonmises",
                     std::numeric_limits<double>::quiet_NaN(), 0.03});
  records.push_back({0, "siteA", "wimre_quantile", "bwhr", 0.95, 0.021});
  records.push_back({1, "siteA", "wimre_quantile", "bwhr", 0.95, 0.025});
  const std::string text = windcond::study_csv(records);
  const auto path = temp_file("windcond_study_test.csv", text);
  const auto table = windcond::read_csv(path);
  REQUIRE(table.headers ==
          std::vector<std::string>{"replicate", "location", "metric", "estimator",
                                   "tau", "value"});
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0][4].empty());
  CHECK(*windcond::parse_double(table.rows[1][4]) == 0.95);

  const std::string summary = windcond::study_summary_csv(records);
  CHECK(summary.find("siteA|bwhr") != std::string::npos);
  CHECK(summary.find("0.023 (") != std::string::npos);  // mean of .021/.025
  std::filesystem::remove(path);
}

TEST_CASE("uv ingestion converts to polar samples") {
  const auto path = temp_file("windcond_ingest_uv.csv",
                              "u,v,year\n"
                              "0,1,1995\n"
                              "1,0,1995\n"
                              "0,0,1996\n"
                              "nan,1,1996\n"
                              "3,,1996\n"
                              "2,2,1996\n");
  const auto result = windcond::ingest(path);
  CHECK(result.skipped == 2);
  REQUIRE(result.data.samples.size() == 4);

  const auto& north = result.data.samples[0];
  CHECK(north.speed == 1.0);
  CHECK(north.direction.radians() == 0.0);
  CHECK(north.year == 1995);

  const auto& east = result.data.samples[1];
  CHECK(east.speed == 1.0);
  CHECK(east.direction.radians() ==
        Catch::Approx(std::numbers::pi / 2.0).margin(1e-15));

  // Calm clamped up to the speed floor.
  CHECK(result.data.samples[2].speed == 0.01);

  REQUIRE(result.data.n_blocks() == 2);
  CHECK(result.data.block_years == std::vector<int>{1995, 1996});
  std::filesystem::remove(path);
}

TEST_CASE("polar ingestion honors the degree flag") {
  const auto path = temp_file("windcond_ingest_polar.csv",
                              "r,phi,year\n"
                              "5,90,2001\n"
                              "-1,10,2001\n");
  windcond::IngestOptions opts;
  opts.format = windcond::InputFormat::Polar;
  opts.unit = windcond::AngleUnit::Degrees;
  const auto result = windcond::ingest(path, opts);
  REQUIRE(result.data.samples.size() == 1);
  CHECK(result.skipped == 1);  // negative speed rejected
  CHECK(result.data.samples[0].speed == 5.0);
  CHECK(result.data.samples[0].direction.radians() ==
        Catch::Approx(std::numbers::pi / 2.0).margin(1e-15));

  windcond::IngestOptions no_unit;
  no_unit.format = windcond::InputFormat::Polar;
  CHECK_THROWS_AS(windcond::ingest(path, no_unit), windcond::IngestError);
  std::filesystem::remove(path);
}

TEST_CASE("ingestion rejects empty or malformed files") {
  const auto headers_only = temp_file("windcond_ingest_empty.csv", "u,v,year\n");
  CHECK_THROWS_AS(windcond::ingest(headers_only), windcond::IngestError);
  std::filesystem::remove(headers_only);

  const auto missing = temp_file("windcond_ingest_missing.csv",
                                 "u,year\n1,1999\n");
  CHECK_THROWS_AS(windcond::ingest(missing), windcond::IngestError);
  std::filesystem::remove(missing);

  CHECK_THROWS_AS(windcond::ingest("/nonexistent/windcond.csv"),
                  windcond::IngestError);
}

TEST_CASE("custom column names are honored") {
  const auto path = temp_file("windcond_ingest_cols.csv",
                              "east,north,season_year\n"
                              "0,2,1990\n");
  windcond::IngestOptions opts;
  opts.u_col = "east";
  opts.v_col = "north";
  opts.year_col = "season_year";
  const auto result = windcond::ingest(path, opts);
  REQUIRE(result.data.samples.size() == 1);
  CHECK(result.data.samples[0].speed == 2.0);
  CHECK(result.data.samples[0].year == 1990);
  std::filesystem::remove(path);
}
