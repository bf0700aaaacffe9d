#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "windcond/estimators.hpp"
#include "windcond/fixtures.hpp"
#include "windcond/io.hpp"
#include "windcond/resample.hpp"
#include "windcond/synth.hpp"

/// CLI verbs as library functions. Each command is a pure function of
/// (input files, config, seed); reruns produce byte-identical outputs.
/// Errors leave on the error stream as one-line JSON so drivers can triage
/// failures mechanically.

namespace windcond {

struct RunConfig {
  // data sources: a CSV path, or a truth fixture (name or JSON path) to sample
  std::string input;
  std::string second_input;  // future-period dataset (difference mode)
  std::string fixture;
  std::string future_fixture;
  InputFormat format = InputFormat::Uv;
  std::optional<AngleUnit> unit;  // mandatory for polar CSVs
  std::string u_col = "u";
  std::string v_col = "v";
  std::string r_col = "r";
  std::string phi_col = "phi";
  std::string year_col = "year";
  std::size_t n = 7360;  // synthetic draw count when sampling a fixture
  std::size_t years = 10;

  EstimatorSettings estimators{};  // N=36, K=8, df=18
  EstimatorKind estimator = EstimatorKind::Bwhr;
  std::vector<double> taus{0.5, 0.75, 0.95};
  std::size_t grid_size = 629;

  std::size_t replicates = 500;
  double level = 0.95;
  std::size_t threads = 1;

  std::uint64_t seed = 0;
  std::string output_dir = ".";

  std::size_t count = 7360;  // simulate: joint draw count
  std::size_t lattice_nu = 101;
  std::size_t lattice_nv = 101;

  // metrics: recompute error measures from previously exported curves
  std::string curves_path;
  std::string reference_path;
  std::string density_path;
};

namespace detail {

inline std::string stream_json(const char* key, const std::string& kind,
                               const std::string& message) {
  nlohmann::json j;
  j[key] = {{"kind", kind}, {"message", message}};
  return j.dump();
}

template <typename Fn>
int run_command(Fn&& fn, std::ostream& err) {
  try {
    fn();
    return 0;
  } catch (const Error& e) {
    err << stream_json("error", e.kind(), e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << stream_json("error", "error", e.what()) << "\n";
    return 1;
  }
}

inline void warn(std::ostream& err, const std::string& kind,
                 const std::string& message) {
  err << stream_json("warning", kind, message) << "\n";
}

}  // namespace detail

inline InputFormat parse_format(const std::string& text) {
  if (text == "uv") return InputFormat::Uv;
  if (text == "polar") return InputFormat::Polar;
  throw std::invalid_argument("unknown input format: " + text);
}

inline AngleUnit parse_unit(const std::string& text) {
  if (text == "rad") return AngleUnit::Radians;
  if (text == "deg") return AngleUnit::Degrees;
  throw std::invalid_argument("unknown angle unit: " + text);
}

inline BinScheme parse_scheme(const std::string& text) {
  if (text == "equal-width") return BinScheme::EqualWidth;
  if (text == "equal-frequency") return BinScheme::EqualFrequency;
  throw std::invalid_argument("unknown binning scheme: " + text);
}

inline BinSummary parse_summary(const std::string& text) {
  if (text == "circular-median") return BinSummary::CircularMedian;
  if (text == "midpoint") return BinSummary::Midpoint;
  throw std::invalid_argument("unknown bin summary: " + text);
}

inline EstimatorKind parse_estimator(const std::string& text) {
  if (text == "bwhr") return EstimatorKind::Bwhr;
  if (text == "bpqr") return EstimatorKind::Bpqr;
  throw std::invalid_argument("unknown estimator: " + text);
}

/// Merge a JSON config file into `config`; only keys present in the file are
/// touched, so later command-line flags can still override.
inline void apply_config_json(RunConfig& config, const nlohmann::json& j) {
  const auto str = [&](const char* key, std::string& field) {
    if (j.contains(key)) field = j.at(key).get<std::string>();
  };
  const auto num = [&](const char* key, std::size_t& field) {
    if (j.contains(key)) field = j.at(key).get<std::size_t>();
  };
  str("input", config.input);
  str("future_input", config.second_input);
  str("fixture", config.fixture);
  str("future_fixture", config.future_fixture);
  if (j.contains("format")) config.format = parse_format(j.at("format").get<std::string>());
  if (j.contains("unit")) config.unit = parse_unit(j.at("unit").get<std::string>());
  str("u_col", config.u_col);
  str("v_col", config.v_col);
  str("r_col", config.r_col);
  str("phi_col", config.phi_col);
  str("year_col", config.year_col);
  num("n", config.n);
  num("years", config.years);
  num("n_bins", config.estimators.binning.n_bins);
  if (j.contains("scheme")) {
    config.estimators.binning.scheme = parse_scheme(j.at("scheme").get<std::string>());
  }
  if (j.contains("summary")) {
    config.estimators.binning.summary = parse_summary(j.at("summary").get<std::string>());
  }
  num("k_alpha", config.estimators.k_alpha);
  num("k_beta", config.estimators.k_beta);
  num("df", config.estimators.basis.df);
  if (j.contains("estimator")) {
    config.estimator = parse_estimator(j.at("estimator").get<std::string>());
  }
  if (j.contains("taus")) config.taus = j.at("taus").get<std::vector<double>>();
  num("grid", config.grid_size);
  num("replicates", config.replicates);
  if (j.contains("level")) config.level = j.at("level").get<double>();
  num("threads", config.threads);
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  str("output_dir", config.output_dir);
  num("count", config.count);
  num("lattice_nu", config.lattice_nu);
  num("lattice_nv", config.lattice_nv);
  str("curves", config.curves_path);
  str("reference", config.reference_path);
  str("density", config.density_path);
}

inline void apply_config_file(RunConfig& config, const std::string& path) {
  apply_config_json(config, nlohmann::json::parse(read_text_file(path)));
}

/// WINDCOND_SEED overrides the seed from the config file; an explicit
/// command-line --seed still wins (callers apply flags after this).
inline void apply_env_seed(RunConfig& config) {
  const char* raw = std::getenv("WINDCOND_SEED");
  if (raw == nullptr) return;
  std::uint64_t value = 0;
  const std::string_view text(raw);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("WINDCOND_SEED is not an unsigned integer: " +
                                std::string(raw));
  }
  config.seed = value;
}

/// Accepts either a shipped fixture name or a path to a truth JSON file.
inline GaussianMixtureTruth load_truth_spec(const std::string& spec) {
  for (const std::string& name : fixture_names()) {
    if (spec == name) return load_fixture(name);
  }
  return truth_from_json(nlohmann::json::parse(read_text_file(spec)));
}

namespace detail {

inline IngestOptions ingest_options(const RunConfig& config) {
  IngestOptions opts;
  opts.format = config.format;
  opts.unit = config.unit;
  opts.u_col = config.u_col;
  opts.v_col = config.v_col;
  opts.r_col = config.r_col;
  opts.phi_col = config.phi_col;
  opts.year_col = config.year_col;
  return opts;
}

/// Resolve one dataset: CSV input wins; otherwise sample the fixture.
inline BlockedDataset command_dataset(const RunConfig& config,
                                      const std::string& input,
                                      const std::string& fixture,
                                      std::uint64_t sample_seed,
                                      std::ostream& log) {
  if (!input.empty()) {
    IngestResult result = ingest(input, ingest_options(config));
    if (result.skipped > 0) {
      log << input << ": skipped " << result.skipped
          << " rows with missing or non-finite values\n";
    }
    return std::move(result.data);
  }
  if (!fixture.empty()) {
    const GaussianMixtureTruth truth = load_truth_spec(fixture);
    return make_blocked(truth_sample(truth, config.n, config.years, sample_seed));
  }
  throw IngestError("no input: provide a CSV path or a truth fixture");
}

inline std::vector<Angle> directions_of(std::span<const WindSample> samples) {
  std::vector<Angle> dirs;
  dirs.reserve(samples.size());
  for (const WindSample& s : samples) dirs.push_back(s.direction);
  return dirs;
}

inline std::filesystem::path output_file(const RunConfig& config,
                                         const std::string& name,
                                         std::ostream& log) {
  std::filesystem::create_directories(config.output_dir);
  std::filesystem::path path = std::filesystem::path(config.output_dir) / name;
  log << "wrote " << path.string() << "\n";
  return path;
}

inline std::string model_json_text(const nlohmann::json& j) {
  return j.dump(2) + "\n";
}

}  // namespace detail

/// Fit both estimators and the direction model; export models and
/// plot-ready curves.
inline int cmd_fit(const RunConfig& config, std::ostream& log, std::ostream& err) {
  return detail::run_command(
      [&] {
        const BlockedDataset data = detail::command_dataset(
            config, config.input, config.fixture, Rng::derive(config.seed, 1), log);
        const std::vector<Angle> dirs = detail::directions_of(data.samples);
        const DirectionGrid grid = DirectionGrid::uniform(config.grid_size);

        const VonMisesMixtureModel vm = select_components(
            dirs, Rng::derive(config.seed, 2),
            config.estimators.vm_min_components, config.estimators.vm_max_components);
        const DirectionalWeibullModel bwhr =
            bwhr_fit(data.samples, config.estimators.binning, config.estimators.k_alpha,
                     config.estimators.k_beta, grid.size());

        std::vector<CurveSample> bwhr_curves, bpqr_curves;
        for (double tau : config.taus) {
          bwhr_curves.push_back(curve_from_bwhr(bwhr, grid, tau));
          bpqr_curves.push_back(
              curve_from_bpqr(bpqr_fit(data.samples, tau, config.estimators.basis), grid));
        }

        write_text_file(detail::output_file(config, "vonmises.json", log),
                        detail::model_json_text(vonmises_to_json(vm)));
        write_text_file(detail::output_file(config, "bwhr.json", log),
                        detail::model_json_text(bwhr_to_json(bwhr)));
        write_text_file(detail::output_file(config, "curves_bwhr.csv", log),
                        curves_csv(grid, config.taus, bwhr_curves));
        write_text_file(detail::output_file(config, "curves_bpqr.csv", log),
                        curves_csv(grid, config.taus, bpqr_curves));
        write_text_file(detail::output_file(config, "direction_density.csv", log),
                        density_csv(curve_from_mixture(vm, grid)));
      },
      err);
}

/// Percentile bands for the direction density and quantile curves; with a
/// second dataset, future-minus-present quantile difference bands plus the
/// direction-averaged differences.
inline int cmd_bootstrap(const RunConfig& config, std::ostream& log,
                         std::ostream& err) {
  return detail::run_command(
      [&] {
        const DirectionGrid grid = DirectionGrid::uniform(config.grid_size);
        const BlockedDataset present = detail::command_dataset(
            config, config.input, config.fixture, Rng::derive(config.seed, 1), log);

        const bool difference_mode =
            !config.second_input.empty() || !config.future_fixture.empty();
        if (difference_mode) {
          const BlockedDataset future = detail::command_dataset(
              config, config.second_input, config.future_fixture,
              Rng::derive(config.seed, 3), log);
          nlohmann::json summary;
          summary["differences"] = nlohmann::json::array();
          for (std::size_t i = 0; i < config.taus.size(); ++i) {
            const double tau = config.taus[i];
            const QuantileDifferenceBand qd = quantile_difference_band(
                present, future, tau, config.estimator, config.estimators, grid,
                config.replicates, config.level, Rng::derive(config.seed, 100 + i),
                config.threads);
            if (qd.band.tail_clamped) {
              detail::warn(err, "tail_clamped",
                           "percentile indices clamp: fewer than one expected tail "
                           "replicate at this level");
            }
            write_text_file(
                detail::output_file(
                    config, "band_qdiff_" + curve_level_label(tau) + ".csv", log),
                band_csv(qd.band));
            summary["differences"].push_back({{"tau", tau},
                                              {"mean", qd.mean_difference},
                                              {"lower", qd.mean_lower},
                                              {"upper", qd.mean_upper}});
          }
          write_text_file(detail::output_file(config, "summary.json", log),
                          detail::model_json_text(summary));
          return;
        }

        // Component count is selected once on the original sample and held
        // fixed across replicates.
        const std::vector<Angle> dirs = detail::directions_of(present.samples);
        const VonMisesMixtureModel vm0 = select_components(
            dirs, Rng::derive(config.seed, 2),
            config.estimators.vm_min_components, config.estimators.vm_max_components);
        const std::size_t k0 = vm0.components.size();
        const std::uint64_t em_seed = Rng::derive(config.seed, 4);
        CurveStatistic density_stat = [&, k0, em_seed](const BlockedDataset& d) {
          const std::vector<Angle> ds = detail::directions_of(d.samples);
          return curve_from_mixture(em_fit(ds, k0, em_seed), grid);
        };
        const BootstrapBand density_band =
            bootstrap_band(present, density_stat, config.replicates, config.level,
                           Rng::derive(config.seed, 5), config.threads);
        if (density_band.tail_clamped) {
          detail::warn(err, "tail_clamped",
                       "percentile indices clamp: fewer than one expected tail "
                       "replicate at this level");
        }
        write_text_file(detail::output_file(config, "band_density.csv", log),
                        band_csv(density_band));

        for (std::size_t i = 0; i < config.taus.size(); ++i) {
          const double tau = config.taus[i];
          CurveStatistic stat = [&, tau](const BlockedDataset& d) {
            return quantile_curve(d.samples, tau, config.estimator,
                                  config.estimators, grid);
          };
          const BootstrapBand band =
              bootstrap_band(present, stat, config.replicates, config.level,
                             Rng::derive(config.seed, 100 + i), config.threads);
          if (band.tail_clamped) {
            detail::warn(err, "tail_clamped",
                         "percentile indices clamp: fewer than one expected tail "
                         "replicate at this level");
          }
          write_text_file(
              detail::output_file(config, "band_" + curve_level_label(tau) + ".csv",
                                  log),
              band_csv(band));
        }
      },
      err);
}

/// Synthetic-truth replication study over one or more fixtures; exports
/// per-replicate records plus a mean (sd) summary table.
inline int cmd_study(const RunConfig& config, std::ostream& log,
                     std::ostream& err) {
  return detail::run_command(
      [&] {
        std::vector<std::string> locations;
        if (!config.fixture.empty() && config.fixture != "all") {
          locations.push_back(config.fixture);
        } else {
          locations = fixture_names();
        }
        std::optional<GaussianMixtureTruth> future;
        if (!config.future_fixture.empty()) {
          future = load_truth_spec(config.future_fixture);
        }

        std::vector<MetricRecord> records;
        for (std::size_t i = 0; i < locations.size(); ++i) {
          const GaussianMixtureTruth truth = load_truth_spec(locations[i]);
          StudyConfig sc;
          sc.n = config.n;
          sc.replicates = config.replicates;
          sc.years = config.years;
          sc.taus = config.taus;
          sc.grid_size = config.grid_size;
          sc.estimators = config.estimators;
          sc.location = locations[i];
          sc.threads = config.threads;
          const StudyResult result =
              run_study(truth, future, sc, Rng::derive(config.seed, 200 + i));
          log << locations[i] << ": " << result.failures.size()
              << " failed replicate stages\n";
          if (result.failure_flagged) {
            detail::warn(err, "unstable_study",
                         locations[i] + ": more than 5% of replicates failed");
          }
          records.insert(records.end(), result.records.begin(), result.records.end());
        }
        write_text_file(detail::output_file(config, "study.csv", log),
                        study_csv(records));
        write_text_file(detail::output_file(config, "summary.csv", log),
                        study_summary_csv(records));
      },
      err);
}

/// Draw from fitted models (direction mixture + conditional Weibull) and
/// export the sample with a kernel estimate of its joint (u,v) density.
inline int cmd_simulate(const RunConfig& config, std::ostream& log,
                        std::ostream& err) {
  return detail::run_command(
      [&] {
        const std::filesystem::path model_dir =
            config.input.empty() ? std::filesystem::path(".")
                                 : std::filesystem::path(config.input);
        const VonMisesMixtureModel vm = vonmises_from_json(
            nlohmann::json::parse(read_text_file(model_dir / "vonmises.json")));
        const DirectionalWeibullModel bwhr = bwhr_from_json(
            nlohmann::json::parse(read_text_file(model_dir / "bwhr.json")));

        const std::vector<UvPair> points =
            joint_simulate(vm, bwhr, config.count, config.seed);

        // Year labels follow the synthetic-sample convention: contiguous
        // equal blocks, so the export is ingestible as a blocked dataset.
        const std::size_t per_year =
            std::max<std::size_t>(config.count / std::max<std::size_t>(config.years, 1), 1);
        std::string csv = "u,v,year\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
          const std::size_t year =
              std::min(i / per_year, config.years - 1) + 1;
          csv += format_double(points[i].u);
          csv += ",";
          csv += format_double(points[i].v);
          csv += ",";
          csv += std::to_string(year);
          csv += "\n";
        }
        write_text_file(detail::output_file(config, "simulated_uv.csv", log), csv);

        const Lattice2d lattice =
            lattice_covering(points, config.lattice_nu, config.lattice_nv);
        const DensitySurface surface = joint_density_estimate(points, lattice);
        std::string density = "u,v,density\n";
        for (std::size_t i = 0; i < lattice.nu; ++i) {
          for (std::size_t j = 0; j < lattice.nv; ++j) {
            density += format_double(lattice.u_at(i));
            density += ",";
            density += format_double(lattice.v_at(j));
            density += ",";
            density += format_double(surface.values(i, j));
            density += "\n";
          }
        }
        write_text_file(detail::output_file(config, "joint_density.csv", log),
                        density);
      },
      err);
}

namespace detail {

struct CurveTable {
  DirectionGrid grid;
  std::vector<std::string> labels;           // q-columns in file order
  std::vector<std::vector<double>> columns;  // one vector per label
};

inline CurveTable parse_curve_table(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  CurveTable out;
  std::vector<std::size_t> value_cols;
  for (std::size_t c = 0; c < table.headers.size(); ++c) {
    if (table.headers[c] == "phi_rad" || table.headers[c] == "phi_deg") continue;
    out.labels.push_back(table.headers[c]);
    value_cols.push_back(c);
  }
  const auto phi_it =
      std::find(table.headers.begin(), table.headers.end(), "phi_rad");
  if (phi_it == table.headers.end()) {
    throw IngestError(path.string() + ": missing phi_rad column");
  }
  const std::size_t phi_col =
      static_cast<std::size_t>(phi_it - table.headers.begin());
  out.columns.resize(value_cols.size());
  for (const auto& row : table.rows) {
    const auto phi = parse_double(row[phi_col]);
    if (!phi) throw IngestError(path.string() + ": bad phi_rad value");
    out.grid.angles.push_back(*phi);
    for (std::size_t k = 0; k < value_cols.size(); ++k) {
      const auto v = parse_double(row[value_cols[k]]);
      if (!v) throw IngestError(path.string() + ": bad numeric value");
      out.columns[k].push_back(*v);
    }
  }
  return out;
}

}  // namespace detail

/// Recompute error measures from stored curves: an estimate file and a
/// reference file (shared grid), weighted by an exported direction density.
inline int cmd_metrics(const RunConfig& config, std::ostream& log,
                       std::ostream& err) {
  return detail::run_command(
      [&] {
        if (config.curves_path.empty() || config.reference_path.empty() ||
            config.density_path.empty()) {
          throw IngestError(
              "metrics needs --curves, --reference, and --density files");
        }
        const detail::CurveTable est = detail::parse_curve_table(config.curves_path);
        const detail::CurveTable ref =
            detail::parse_curve_table(config.reference_path);
        const detail::CurveTable dens =
            detail::parse_curve_table(config.density_path);
        if (est.grid.size() != ref.grid.size() ||
            est.grid.size() != dens.grid.size()) {
          throw IngestError("curve files disagree on grid size");
        }
        for (std::size_t i = 0; i < est.grid.size(); ++i) {
          if (std::abs(est.grid.angles[i] - ref.grid.angles[i]) > 1e-12 ||
              std::abs(est.grid.angles[i] - dens.grid.angles[i]) > 1e-12) {
            throw IngestError("curve files disagree on grid angles");
          }
        }
        if (dens.columns.size() != 1) {
          throw IngestError("density file must carry exactly one value column");
        }
        CurveSample weight;
        weight.grid = est.grid;
        weight.values = dens.columns[0];

        nlohmann::json out;
        for (std::size_t k = 0; k < est.labels.size(); ++k) {
          const auto rit =
              std::find(ref.labels.begin(), ref.labels.end(), est.labels[k]);
          if (rit == ref.labels.end()) {
            throw IngestError("reference file missing column " + est.labels[k]);
          }
          CurveSample estimate, reference;
          estimate.grid = est.grid;
          estimate.values = est.columns[k];
          reference.grid = ref.grid;
          reference.values =
              ref.columns[static_cast<std::size_t>(rit - ref.labels.begin())];
          const std::vector<CurveSample> single{estimate};
          out["wimre"][est.labels[k]] = wimre(estimate, reference, weight);
          out["mse"][est.labels[k]] = mse_curve(single, reference).average;
          out["wimse"][est.labels[k]] = wimse(single, reference, weight);
        }
        write_text_file(detail::output_file(config, "metrics.json", log),
                        detail::model_json_text(out));
      },
      err);
}

}  // namespace windcond
