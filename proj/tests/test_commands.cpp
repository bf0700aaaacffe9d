#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "windcond/commands.hpp"
#include "windcond/errors.hpp"

using windcond::RunConfig;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "windcond-cmd-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// A small (u, v, year) CSV drawn from the shipped unimodal truth.
fs::path sample_csv(const std::string& name, std::size_t n, std::uint64_t seed) {
  const auto truth = windcond::load_fixture("plains-unimodal");
  const auto samples = windcond::truth_sample(truth, n, 10, seed);
  std::string csv = "u,v,year\n";
  for (const auto& s : samples) {
    const windcond::UvPair p = windcond::to_cartesian(s.speed, s.direction);
    csv += windcond::format_double(p.u) + "," + windcond::format_double(p.v) + "," +
           std::to_string(s.year) + "\n";
  }
  const fs::path path = fresh_dir("data") / name;
  windcond::write_text_file(path, csv);
  return path;
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::size_t column_of(const windcond::CsvTable& table, const std::string& name) {
  for (std::size_t c = 0; c < table.headers.size(); ++c) {
    if (table.headers[c] == name) return c;
  }
  FAIL("missing column " + name);
  return 0;
}

double cell(const windcond::CsvTable& table, std::size_t row, std::size_t col) {
  const auto v = windcond::parse_double(table.rows[row][col]);
  REQUIRE(v.has_value());
  return *v;
}

/// Shared small-problem settings so command tests stay fast.
RunConfig quick_config(const fs::path& out_dir) {
  RunConfig config;
  config.fixture = "plains-unimodal";
  config.n = 1840;
  config.grid_size = 157;
  config.estimators.vm_max_components = 2;
  config.seed = 4;
  config.output_dir = out_dir.string();
  return config;
}

}  // namespace

TEST_CASE("option parsers map the documented spellings and reject others") {
  CHECK(windcond::parse_format("uv") == windcond::InputFormat::Uv);
  CHECK(windcond::parse_format("polar") == windcond::InputFormat::Polar);
  CHECK_THROWS_AS(windcond::parse_format("xyz"), std::invalid_argument);
  CHECK(windcond::parse_unit("rad") == windcond::AngleUnit::Radians);
  CHECK(windcond::parse_unit("deg") == windcond::AngleUnit::Degrees);
  CHECK_THROWS_AS(windcond::parse_unit("grad"), std::invalid_argument);
  CHECK(windcond::parse_scheme("equal-width") == windcond::BinScheme::EqualWidth);
  CHECK(windcond::parse_scheme("equal-frequency") ==
        windcond::BinScheme::EqualFrequency);
  CHECK_THROWS_AS(windcond::parse_scheme("quantile"), std::invalid_argument);
  CHECK(windcond::parse_summary("circular-median") ==
        windcond::BinSummary::CircularMedian);
  CHECK(windcond::parse_summary("midpoint") == windcond::BinSummary::Midpoint);
  CHECK_THROWS_AS(windcond::parse_summary("mean"), std::invalid_argument);
  CHECK(windcond::parse_estimator("bwhr") == windcond::EstimatorKind::Bwhr);
  CHECK(windcond::parse_estimator("bpqr") == windcond::EstimatorKind::Bpqr);
  CHECK_THROWS_AS(windcond::parse_estimator("ols"), std::invalid_argument);
}

TEST_CASE("config json merge only touches keys present in the file") {
  RunConfig config;
  windcond::apply_config_json(config, nlohmann::json{{"n_bins", 24},
                                                     {"estimator", "bpqr"},
                                                     {"taus", {0.9}},
                                                     {"seed", 77},
                                                     {"level", 0.9},
                                                     {"format", "polar"},
                                                     {"unit", "deg"}});
  CHECK(config.estimators.binning.n_bins == 24);
  CHECK(config.estimator == windcond::EstimatorKind::Bpqr);
  REQUIRE(config.taus.size() == 1);
  CHECK(config.taus[0] == 0.9);
  CHECK(config.seed == 77);
  CHECK(config.level == 0.9);
  CHECK(config.format == windcond::InputFormat::Polar);
  REQUIRE(config.unit.has_value());
  CHECK(*config.unit == windcond::AngleUnit::Degrees);
  // untouched keys keep their defaults
  CHECK(config.n == 7360);
  CHECK(config.estimators.k_alpha == 8);
  CHECK(config.estimators.basis.df == 18);
  CHECK(config.replicates == 500);

  // a later explicit flag always wins over the merged file
  config.seed = 9;
  CHECK(config.seed == 9);
}

TEST_CASE("seed precedence is flag over environment over config file") {
  const fs::path dir = fresh_dir("config");
  const fs::path file = dir / "run.json";
  windcond::write_text_file(file, R"({"seed": 5, "n": 512})");

  RunConfig config;
  windcond::apply_config_file(config, file.string());
  CHECK(config.seed == 5);
  CHECK(config.n == 512);

  REQUIRE(setenv("WINDCOND_SEED", "42", 1) == 0);
  windcond::apply_env_seed(config);
  CHECK(config.seed == 42);

  config.seed = 9;  // explicit --seed, applied last by the driver
  CHECK(config.seed == 9);

  REQUIRE(setenv("WINDCOND_SEED", "not-a-seed", 1) == 0);
  CHECK_THROWS_AS(windcond::apply_env_seed(config), std::invalid_argument);
  REQUIRE(unsetenv("WINDCOND_SEED") == 0);
  windcond::apply_env_seed(config);  // absent variable changes nothing
  CHECK(config.seed == 9);
}

TEST_CASE("fit exports models and curves, and reruns are byte-identical") {
  const fs::path dir_a = fresh_dir("fit-a");
  std::ostringstream log, err;
  REQUIRE(windcond::cmd_fit(quick_config(dir_a), log, err) == 0);
  CHECK(err.str().empty());

  const std::vector<std::string> names{"vonmises.json", "bwhr.json",
                                       "curves_bwhr.csv", "curves_bpqr.csv",
                                       "direction_density.csv"};
  for (const auto& name : names) CHECK(fs::exists(dir_a / name));

  const auto curves = windcond::read_csv(dir_a / "curves_bwhr.csv");
  CHECK(curves.headers ==
        std::vector<std::string>{"phi_rad", "phi_deg", "q50", "q75", "q95"});
  REQUIRE(curves.rows.size() == 157);
  const std::size_t q50 = column_of(curves, "q50");
  const std::size_t q95 = column_of(curves, "q95");
  for (std::size_t i = 0; i < curves.rows.size(); ++i) {
    CHECK(cell(curves, i, q50) < cell(curves, i, q95));
  }

  // the exported speed model is periodic across the seam
  const auto bwhr = windcond::bwhr_from_json(
      nlohmann::json::parse(windcond::read_text_file(dir_a / "bwhr.json")));
  const double at_zero = windcond::conditional_quantile(
      bwhr, windcond::Angle::from_radians(0.0), 0.95);
  const double at_seam = windcond::conditional_quantile(
      bwhr, windcond::Angle::from_radians(2.0 * std::numbers::pi - 1e-9), 0.95);
  CHECK(at_seam == Catch::Approx(at_zero).margin(1e-6));

  // the exported direction density carries unit mass
  const auto density = windcond::read_csv(dir_a / "direction_density.csv");
  REQUIRE(density.rows.size() == 157);
  const std::size_t dcol = column_of(density, "density");
  double mean = 0.0;
  for (std::size_t i = 0; i < density.rows.size(); ++i) mean += cell(density, i, dcol);
  mean /= static_cast<double>(density.rows.size());
  CHECK(mean * 2.0 * std::numbers::pi == Catch::Approx(1.0).margin(0.01));

  // identical config and seed: outputs match byte for byte
  const fs::path dir_b = fresh_dir("fit-b");
  std::ostringstream log2, err2;
  REQUIRE(windcond::cmd_fit(quick_config(dir_b), log2, err2) == 0);
  for (const auto& name : names) {
    CHECK(windcond::read_text_file(dir_a / name) ==
          windcond::read_text_file(dir_b / name));
  }
}

TEST_CASE("fit reports a structured error when bins cannot support the harmonics") {
  const fs::path dir = fresh_dir("fit-fail");
  RunConfig config = quick_config(dir);
  config.estimators.binning.n_bins = 10;  // default order 8 needs 17 bins
  std::ostringstream log, err;
  REQUIRE(windcond::cmd_fit(config, log, err) != 0);

  const auto lines = json_lines(err.str());
  REQUIRE(lines.size() == 1);
  REQUIRE(lines[0].contains("error"));
  CHECK(lines[0]["error"]["kind"] == "insufficient_bins");
  CHECK(!lines[0]["error"]["message"].get<std::string>().empty());
  CHECK(!fs::exists(dir / "vonmises.json"));  // nothing was written
}

TEST_CASE("commands without a data source fail with an ingest error") {
  std::ostringstream log, err;
  REQUIRE(windcond::cmd_fit(RunConfig{}, log, err) != 0);
  auto lines = json_lines(err.str());
  REQUIRE(lines.size() == 1);
  CHECK(lines[0]["error"]["kind"] == "ingest_error");

  std::ostringstream log2, err2;
  REQUIRE(windcond::cmd_metrics(RunConfig{}, log2, err2) != 0);
  lines = json_lines(err2.str());
  REQUIRE(lines.size() == 1);
  CHECK(lines[0]["error"]["kind"] == "ingest_error");
}

TEST_CASE("difference bands from identical present and future data straddle zero") {
  const fs::path csv = sample_csv("present.csv", 1472, 21);
  const fs::path dir = fresh_dir("qdiff");
  RunConfig config;
  config.input = csv.string();
  config.second_input = csv.string();
  config.taus = {0.5};
  config.replicates = 100;
  config.grid_size = 157;
  config.seed = 6;
  config.output_dir = dir.string();

  std::ostringstream log, err;
  REQUIRE(windcond::cmd_bootstrap(config, log, err) == 0);

  const auto band = windcond::read_csv(dir / "band_qdiff_q50.csv");
  CHECK(band.headers == std::vector<std::string>{"phi_rad", "estimate", "lower",
                                                 "upper", "level"});
  REQUIRE(band.rows.size() == 157);
  const std::size_t est = column_of(band, "estimate");
  const std::size_t lo = column_of(band, "lower");
  const std::size_t hi = column_of(band, "upper");
  const std::size_t lvl = column_of(band, "level");
  for (std::size_t i = 0; i < band.rows.size(); ++i) {
    CHECK(cell(band, i, est) == 0.0);  // same data, same fit, exact zero
    CHECK(cell(band, i, lo) <= 0.0);
    CHECK(cell(band, i, hi) >= 0.0);
    CHECK(cell(band, i, lvl) == 0.95);
  }

  const auto summary =
      nlohmann::json::parse(windcond::read_text_file(dir / "summary.json"));
  REQUIRE(summary.at("differences").size() == 1);
  const auto& entry = summary["differences"][0];
  CHECK(entry.at("tau") == 0.5);
  CHECK(entry.at("mean").get<double>() == 0.0);
  CHECK(entry.at("lower").get<double>() <= 0.0);
  CHECK(entry.at("upper").get<double>() >= 0.0);
}

TEST_CASE("bootstrap warns when the replicate budget cannot resolve the tails") {
  const fs::path csv = sample_csv("clamp.csv", 1472, 22);
  const fs::path dir = fresh_dir("clamp");
  RunConfig config;
  config.input = csv.string();
  config.second_input = csv.string();
  config.taus = {0.5};
  config.replicates = 50;
  config.level = 0.99;  // 50 replicates leave no whole tail replicate
  config.grid_size = 157;
  config.seed = 7;
  config.output_dir = dir.string();

  std::ostringstream log, err;
  REQUIRE(windcond::cmd_bootstrap(config, log, err) == 0);
  const auto lines = json_lines(err.str());
  REQUIRE(!lines.empty());
  bool warned = false;
  for (const auto& line : lines) {
    if (line.contains("warning") && line["warning"]["kind"] == "tail_clamped") {
      warned = true;
    }
  }
  CHECK(warned);
  CHECK(fs::exists(dir / "band_qdiff_q50.csv"));
}

TEST_CASE("single-dataset bootstrap exports density and quantile bands") {
  const fs::path csv = sample_csv("single.csv", 1472, 23);
  const fs::path dir = fresh_dir("single-band");
  RunConfig config;
  config.input = csv.string();
  config.taus = {0.5};
  config.replicates = 40;
  config.grid_size = 157;
  config.estimators.vm_max_components = 2;
  config.seed = 8;
  config.output_dir = dir.string();

  std::ostringstream log, err;
  REQUIRE(windcond::cmd_bootstrap(config, log, err) == 0);

  const auto density = windcond::read_csv(dir / "band_density.csv");
  REQUIRE(density.rows.size() == 157);
  const std::size_t est = column_of(density, "estimate");
  const std::size_t lo = column_of(density, "lower");
  const std::size_t hi = column_of(density, "upper");
  double mean = 0.0;
  for (std::size_t i = 0; i < density.rows.size(); ++i) {
    CHECK(cell(density, i, lo) <= cell(density, i, hi));
    CHECK(cell(density, i, est) >= 0.0);
    mean += cell(density, i, est);
  }
  mean /= static_cast<double>(density.rows.size());
  CHECK(mean * 2.0 * std::numbers::pi == Catch::Approx(1.0).margin(0.02));

  const auto band = windcond::read_csv(dir / "band_q50.csv");
  REQUIRE(band.rows.size() == 157);
  const std::size_t blo = column_of(band, "lower");
  const std::size_t bhi = column_of(band, "upper");
  for (std::size_t i = 0; i < band.rows.size(); ++i) {
    CHECK(cell(band, i, blo) <= cell(band, i, bhi));
  }
}

TEST_CASE("study smoke run records every replicate and summarizes them") {
  const fs::path dir = fresh_dir("study");
  RunConfig config;
  config.fixture = "plains-unimodal";
  config.n = 1104;
  config.replicates = 5;
  config.grid_size = 157;
  config.estimators.vm_max_components = 2;
  config.seed = 9;
  config.output_dir = dir.string();

  std::ostringstream log, err;
  REQUIRE(windcond::cmd_study(config, log, err) == 0);

  const auto study = windcond::read_csv(dir / "study.csv");
  const std::size_t metric = column_of(study, "metric");
  const std::size_t estimator = column_of(study, "estimator");
  const std::size_t tau = column_of(study, "tau");
  const auto count = [&](const std::string& m, const std::string& e,
                         const std::string& t) {
    std::size_t n = 0;
    for (const auto& row : study.rows) {
      if (row[metric] == m && row[estimator] == e && row[tau] == t) ++n;
    }
    return n;
  };
  CHECK(count("wimre_density", "vonmises", "") == 5);
  for (const std::string est : {"bwhr", "bpqr"}) {
    for (const std::string t : {"0.5", "0.75", "0.95"}) {
      CHECK(count("wimre_quantile", est, t) == 5);
    }
  }
  CHECK(study.rows.size() == 35);  // no difference metrics without a future truth

  const std::string summary = windcond::read_text_file(dir / "summary.csv");
  CHECK(summary.find("plains-unimodal|bwhr") != std::string::npos);
  CHECK(summary.find("plains-unimodal|bpqr") != std::string::npos);
  CHECK(summary.find(" (") != std::string::npos);  // mean (sd) cells
}

TEST_CASE("simulate writes an ingestible sample with a near-unit-mass density") {
  const fs::path model_dir = fresh_dir("sim-models");
  std::ostringstream log, err;
  REQUIRE(windcond::cmd_fit(quick_config(model_dir), log, err) == 0);

  const fs::path dir = fresh_dir("sim-out");
  RunConfig config;
  config.input = model_dir.string();
  config.count = 2000;
  config.lattice_nu = 41;
  config.lattice_nv = 41;
  config.seed = 10;
  config.output_dir = dir.string();
  std::ostringstream log2, err2;
  REQUIRE(windcond::cmd_simulate(config, log2, err2) == 0);

  const auto back = windcond::ingest(dir / "simulated_uv.csv", {});
  CHECK(back.skipped == 0);
  CHECK(back.data.samples.size() == 2000);
  CHECK(back.data.n_blocks() == 10);

  const auto table = windcond::read_csv(dir / "joint_density.csv");
  REQUIRE(table.rows.size() == 41 * 41);
  const std::size_t ucol = column_of(table, "u");
  const std::size_t vcol = column_of(table, "v");
  const std::size_t dcol = column_of(table, "density");
  double u_min = 1e300, u_max = -1e300, v_min = 1e300, v_max = -1e300, sum = 0.0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    u_min = std::min(u_min, cell(table, i, ucol));
    u_max = std::max(u_max, cell(table, i, ucol));
    v_min = std::min(v_min, cell(table, i, vcol));
    v_max = std::max(v_max, cell(table, i, vcol));
    sum += cell(table, i, dcol);
  }
  const double du = (u_max - u_min) / 40.0;
  const double dv = (v_max - v_min) / 40.0;
  CHECK(sum * du * dv == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("metrics on identical curve files reports zero error") {
  const fs::path model_dir = fresh_dir("metrics-models");
  std::ostringstream log, err;
  REQUIRE(windcond::cmd_fit(quick_config(model_dir), log, err) == 0);

  const fs::path dir = fresh_dir("metrics-out");
  RunConfig config;
  config.curves_path = (model_dir / "curves_bwhr.csv").string();
  config.reference_path = (model_dir / "curves_bwhr.csv").string();
  config.density_path = (model_dir / "direction_density.csv").string();
  config.output_dir = dir.string();
  std::ostringstream log2, err2;
  REQUIRE(windcond::cmd_metrics(config, log2, err2) == 0);

  const auto out =
      nlohmann::json::parse(windcond::read_text_file(dir / "metrics.json"));
  for (const std::string label : {"q50", "q75", "q95"}) {
    CHECK(out.at("wimre").at(label).get<double>() == 0.0);
    CHECK(out.at("mse").at(label).get<double>() == 0.0);
    CHECK(out.at("wimse").at(label).get<double>() == 0.0);
  }

  // a different reference produces strictly positive error
  config.reference_path = (model_dir / "curves_bpqr.csv").string();
  config.output_dir = (dir / "cross").string();
  std::ostringstream log3, err3;
  REQUIRE(windcond::cmd_metrics(config, log3, err3) == 0);
  const auto cross = nlohmann::json::parse(
      windcond::read_text_file(dir / "cross" / "metrics.json"));
  CHECK(cross.at("wimre").at("q50").get<double>() > 0.0);
}
