#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "windcond/windcond.hpp"

namespace {

using windcond::RunConfig;

// Shared model/estimation flags; each verb registers the subset it honors.
void add_data_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--input", cfg.input, "input CSV path");
  cmd->add_option("--fixture", cfg.fixture,
                  "truth fixture name or JSON path (sampled when no --input)");
  cmd->add_option("--format", cfg.format, "input format")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, windcond::InputFormat>{
              {"uv", windcond::InputFormat::Uv},
              {"polar", windcond::InputFormat::Polar}}));
  cmd->add_option("--unit", cfg.unit, "angle unit for polar input")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, windcond::AngleUnit>{
              {"rad", windcond::AngleUnit::Radians},
              {"deg", windcond::AngleUnit::Degrees}}));
  cmd->add_option("--u-col", cfg.u_col, "zonal component column name");
  cmd->add_option("--v-col", cfg.v_col, "meridional component column name");
  cmd->add_option("--r-col", cfg.r_col, "speed column name");
  cmd->add_option("--phi-col", cfg.phi_col, "direction column name");
  cmd->add_option("--year-col", cfg.year_col, "year (block) column name");
  cmd->add_option("--n", cfg.n, "synthetic sample size per fixture draw");
  cmd->add_option("--years", cfg.years, "synthetic year-block count");
}

void add_model_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--n-bins", cfg.estimators.binning.n_bins,
                  "direction bin count (0 = auto)");
  cmd->add_option("--scheme", cfg.estimators.binning.scheme, "binning scheme")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, windcond::BinScheme>{
              {"equal-width", windcond::BinScheme::EqualWidth},
              {"equal-frequency", windcond::BinScheme::EqualFrequency}}));
  cmd->add_option("--summary", cfg.estimators.binning.summary,
                  "bin representative angle")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, windcond::BinSummary>{
              {"circular-median", windcond::BinSummary::CircularMedian},
              {"midpoint", windcond::BinSummary::Midpoint}}));
  cmd->add_option("--k-alpha", cfg.estimators.k_alpha,
                  "harmonic order for the shape curve");
  cmd->add_option("--k-beta", cfg.estimators.k_beta,
                  "harmonic order for the scale curve");
  cmd->add_option("--df", cfg.estimators.basis.df,
                  "periodic spline basis dimension");
  cmd->add_option("--estimator", cfg.estimator, "quantile-curve estimator")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, windcond::EstimatorKind>{
              {"bwhr", windcond::EstimatorKind::Bwhr},
              {"bpqr", windcond::EstimatorKind::Bpqr}}));
  cmd->add_option("--tau", cfg.taus, "quantile levels (repeatable)");
  cmd->add_option("--grid", cfg.grid_size, "direction grid size");
}

void add_run_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--out", cfg.output_dir, "output directory");
  cmd->add_option("--threads", cfg.threads, "worker thread count");
}

// --config is honored before the regular flag pass so explicit flags win.
std::string prescan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  const std::string config_path = prescan_config_path(argc, argv);
  try {
    if (!config_path.empty()) windcond::apply_config_file(cfg, config_path);
    windcond::apply_env_seed(cfg);
  } catch (const std::exception& e) {
    std::cerr << R"({"error":{"kind":"config_error","message":")" << e.what()
              << "\"}}\n";
    return 1;
  }

  CLI::App app{"joint wind speed/direction estimation toolkit"};
  app.require_subcommand(1);
  std::string config_dummy;
  app.add_option("--config", config_dummy, "JSON config file (flags override)")
      ->expected(1);

  CLI::App* fit = app.add_subcommand(
      "fit", "fit direction mixture and both quantile-curve estimators");
  add_data_flags(fit, cfg);
  add_model_flags(fit, cfg);
  add_run_flags(fit, cfg);

  CLI::App* boot = app.add_subcommand(
      "bootstrap", "percentile bands; with a future dataset, difference bands");
  add_data_flags(boot, cfg);
  add_model_flags(boot, cfg);
  add_run_flags(boot, cfg);
  boot->add_option("--future-input", cfg.second_input, "future-period CSV path");
  boot->add_option("--future-fixture", cfg.future_fixture,
                   "future-period fixture name or JSON path");
  boot->add_option("--replicates", cfg.replicates, "bootstrap replicates");
  boot->add_option("--level", cfg.level, "confidence level");

  CLI::App* study = app.add_subcommand(
      "study", "synthetic-truth replication study over fixtures");
  add_data_flags(study, cfg);
  add_model_flags(study, cfg);
  add_run_flags(study, cfg);
  study->add_option("--future-fixture", cfg.future_fixture,
                    "future-period fixture for difference metrics");
  study->add_option("--replicates", cfg.replicates, "study replicates");

  CLI::App* sim = app.add_subcommand(
      "simulate", "draw from fitted models and export a joint density");
  sim->add_option("--models", cfg.input,
                  "directory holding vonmises.json and bwhr.json");
  sim->add_option("--count", cfg.count, "number of joint draws");
  sim->add_option("--lattice-nu", cfg.lattice_nu, "density lattice u-resolution");
  sim->add_option("--lattice-nv", cfg.lattice_nv, "density lattice v-resolution");
  sim->add_option("--years", cfg.years, "year-block count for the export");
  add_run_flags(sim, cfg);

  CLI::App* metrics = app.add_subcommand(
      "metrics", "recompute error measures from exported curves");
  metrics->add_option("--curves", cfg.curves_path, "estimated curves CSV");
  metrics->add_option("--reference", cfg.reference_path, "reference curves CSV");
  metrics->add_option("--density", cfg.density_path, "direction density CSV");
  add_run_flags(metrics, cfg);

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) return windcond::cmd_fit(cfg, std::cout, std::cerr);
  if (boot->parsed()) return windcond::cmd_bootstrap(cfg, std::cout, std::cerr);
  if (study->parsed()) return windcond::cmd_study(cfg, std::cout, std::cerr);
  if (sim->parsed()) return windcond::cmd_simulate(cfg, std::cout, std::cerr);
  if (metrics->parsed()) return windcond::cmd_metrics(cfg, std::cout, std::cerr);
  return 1;
}
