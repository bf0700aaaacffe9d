#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "windcond/bwhr.hpp"
#include "windcond/circstats.hpp"
#include "windcond/errors.hpp"
#include "windcond/metrics.hpp"
#include "windcond/resample.hpp"
#include "windcond/synth.hpp"
#include "windcond/types.hpp"

namespace windcond {

/// Shortest representation that round-trips exactly; keeps repeated runs
/// byte-identical.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
  return value;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IngestError("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Model JSON

inline nlohmann::json vonmises_to_json(const VonMisesMixtureModel& model) {
  nlohmann::json j;
  j["weights"] = nlohmann::json::array();
  j["mus_rad"] = nlohmann::json::array();
  j["kappas"] = nlohmann::json::array();
  for (const auto& c : model.components) {
    j["weights"].push_back(c.weight);
    j["mus_rad"].push_back(c.mu.radians());
    j["kappas"].push_back(c.kappa);
  }
  return j;
}

inline VonMisesMixtureModel vonmises_from_json(const nlohmann::json& j) {
  VonMisesMixtureModel model;
  const auto& w = j.at("weights");
  const auto& mus = j.at("mus_rad");
  const auto& kappas = j.at("kappas");
  if (w.size() != mus.size() || w.size() != kappas.size()) {
    throw IngestError("mixture arrays have mismatched lengths");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    model.components.push_back({w[i].get<double>(),
                                normalize_angle(mus[i].get<double>()),
                                kappas[i].get<double>()});
  }
  model.validate();
  return model;
}

namespace detail {

inline nlohmann::json harmonic_to_json(const HarmonicCoefficients& coef) {
  nlohmann::json arr = nlohmann::json::array();
  arr.push_back(coef.intercept);
  for (const auto& [a, b] : coef.pairs) {
    arr.push_back(a);
    arr.push_back(b);
  }
  return arr;
}

inline HarmonicCoefficients harmonic_from_json(const nlohmann::json& arr,
                                               std::size_t order) {
  if (arr.size() != 2 * order + 1) {
    throw IngestError("harmonic coefficient array has wrong length");
  }
  HarmonicCoefficients coef;
  coef.intercept = arr[0].get<double>();
  for (std::size_t k = 0; k < order; ++k) {
    coef.pairs.emplace_back(arr[2 * k + 1].get<double>(), arr[2 * k + 2].get<double>());
  }
  return coef;
}

}  // namespace detail

inline nlohmann::json bwhr_to_json(const DirectionalWeibullModel& model) {
  nlohmann::json j;
  j["K_alpha"] = model.alpha_curve.order();
  j["K_beta"] = model.beta_curve.order();
  j["alpha_coeffs"] = detail::harmonic_to_json(model.alpha_curve);
  j["beta_coeffs"] = detail::harmonic_to_json(model.beta_curve);
  j["n_bins"] = model.binning.n_bins;
  j["scheme"] = model.binning.scheme == BinScheme::EqualWidth ? "equal-width"
                                                              : "equal-frequency";
  return j;
}

inline DirectionalWeibullModel bwhr_from_json(const nlohmann::json& j) {
  DirectionalWeibullModel model;
  const auto k_alpha = j.at("K_alpha").get<std::size_t>();
  const auto k_beta = j.at("K_beta").get<std::size_t>();
  model.alpha_curve = detail::harmonic_from_json(j.at("alpha_coeffs"), k_alpha);
  model.beta_curve = detail::harmonic_from_json(j.at("beta_coeffs"), k_beta);
  model.binning.n_bins = j.at("n_bins").get<std::size_t>();
  const std::string scheme = j.at("scheme").get<std::string>();
  if (scheme == "equal-width") {
    model.binning.scheme = BinScheme::EqualWidth;
  } else if (scheme == "equal-frequency") {
    model.binning.scheme = BinScheme::EqualFrequency;
  } else {
    throw IngestError("unknown binning scheme '" + scheme + "'");
  }
  return model;
}

inline nlohmann::json truth_to_json(const GaussianMixtureTruth& truth) {
  nlohmann::json j;
  j["weights"] = nlohmann::json::array();
  j["means"] = nlohmann::json::array();
  j["covs"] = nlohmann::json::array();
  for (const auto& c : truth.components) {
    j["weights"].push_back(c.weight);
    j["means"].push_back({c.mean(0), c.mean(1)});
    j["covs"].push_back({{c.cov(0, 0), c.cov(0, 1)}, {c.cov(1, 0), c.cov(1, 1)}});
  }
  return j;
}

inline GaussianMixtureTruth truth_from_json(const nlohmann::json& j) {
  GaussianMixtureTruth truth;
  const auto& w = j.at("weights");
  const auto& means = j.at("means");
  const auto& covs = j.at("covs");
  if (w.size() != means.size() || w.size() != covs.size()) {
    throw IngestError("truth arrays have mismatched lengths");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    GaussianComponent c;
    c.weight = w[i].get<double>();
    c.mean = Eigen::Vector2d(means[i].at(0).get<double>(), means[i].at(1).get<double>());
    c.cov << covs[i].at(0).at(0).get<double>(), covs[i].at(0).at(1).get<double>(),
        covs[i].at(1).at(0).get<double>(), covs[i].at(1).at(1).get<double>();
    truth.components.push_back(c);
  }
  truth.validate();
  return truth;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  CsvTable table;
  std::size_t pos = 0;
  bool first = true;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    std::string_view line(content.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t cell_start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cells.emplace_back(line.substr(cell_start, i - cell_start));
        cell_start = i + 1;
      }
    }
    if (first) {
      table.headers = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

inline std::string curve_level_label(double tau) {
  // 0.5 -> "q50", 0.975 -> "q97.5"
  double scaled = tau * 100.0;
  std::string s = format_double(scaled);
  return "q" + s;
}

/// Quantile-curve CSV shared by both estimators:
/// phi_rad,phi_deg,q50,q75,q95 (one q column per requested level).
inline std::string curves_csv(const DirectionGrid& grid, std::span<const double> taus,
                              std::span<const CurveSample> curves) {
  if (taus.size() != curves.size()) {
    throw std::invalid_argument("one curve per quantile level required");
  }
  std::string out = "phi_rad,phi_deg";
  for (double tau : taus) out += "," + curve_level_label(tau);
  out += "\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += format_double(grid.angles[i]);
    out += ",";
    out += format_double(grid.angles[i] * 180.0 / std::numbers::pi);
    for (const CurveSample& c : curves) {
      if (!(c.grid == grid)) throw GridMismatchError("curve grid mismatch in export");
      out += ",";
      out += format_double(c.values[i]);
    }
    out += "\n";
  }
  return out;
}

inline std::string density_csv(const CurveSample& density) {
  density.validate();
  std::string out = "phi_rad,phi_deg,density\n";
  for (std::size_t i = 0; i < density.grid.size(); ++i) {
    out += format_double(density.grid.angles[i]);
    out += ",";
    out += format_double(density.grid.angles[i] * 180.0 / std::numbers::pi);
    out += ",";
    out += format_double(density.values[i]);
    out += "\n";
  }
  return out;
}

inline std::string band_csv(const BootstrapBand& band) {
  std::string out = "phi_rad,estimate,lower,upper,level\n";
  const std::string level = format_double(band.level);
  for (std::size_t i = 0; i < band.grid.size(); ++i) {
    out += format_double(band.grid.angles[i]);
    out += ",";
    out += format_double(band.estimate[i]);
    out += ",";
    out += format_double(band.lower[i]);
    out += ",";
    out += format_double(band.upper[i]);
    out += ",";
    out += level;
    out += "\n";
  }
  return out;
}

inline std::string study_csv(std::span<const MetricRecord> records) {
  std::string out = "replicate,location,metric,estimator,tau,value\n";
  for (const MetricRecord& r : records) {
    out += std::to_string(r.replicate);
    out += ",";
    out += r.location;
    out += ",";
    out += r.metric;
    out += ",";
    out += r.estimator;
    out += ",";
    out += std::isnan(r.tau) ? std::string{} : format_double(r.tau);
    out += ",";
    out += format_double(r.value);
    out += "\n";
  }
  return out;
}

/// Summary table: one row per metric x tau, one column per location x
/// estimator, each cell "mean (sd)" over replicates.
inline std::string study_summary_csv(std::span<const MetricRecord> records) {
  struct Accum {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, double>, std::map<std::string, Accum>> cells;
  std::vector<std::string> column_order;
  for (const MetricRecord& r : records) {
    const double tau_key = std::isnan(r.tau) ? -1.0 : r.tau;
    const std::string col = r.location + "|" + r.estimator;
    Accum& a = cells[{r.metric, tau_key}][col];
    a.sum += r.value;
    a.sumsq += r.value * r.value;
    ++a.n;
    if (std::find(column_order.begin(), column_order.end(), col) == column_order.end()) {
      column_order.push_back(col);
    }
  }
  std::string out = "metric,tau";
  for (const std::string& col : column_order) out += "," + col;
  out += "\n";
  for (const auto& [key, row] : cells) {
    out += key.first;
    out += ",";
    out += key.second < 0.0 ? std::string{} : format_double(key.second);
    for (const std::string& col : column_order) {
      out += ",";
      const auto it = row.find(col);
      if (it == row.end() || it->second.n == 0) continue;
      const Accum& a = it->second;
      const double mean = a.sum / static_cast<double>(a.n);
      double sd = 0.0;
      if (a.n > 1) {
        const double var =
            (a.sumsq - a.sum * mean) / static_cast<double>(a.n - 1);
        sd = std::sqrt(std::max(var, 0.0));
      }
      out += format_double(mean) + " (" + format_double(sd) + ")";
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingest

enum class InputFormat { Uv, Polar };
enum class AngleUnit { Radians, Degrees };

struct IngestOptions {
  InputFormat format = InputFormat::Uv;
  std::optional<AngleUnit> unit;  // mandatory for polar input
  std::string u_col = "u";
  std::string v_col = "v";
  std::string r_col = "r";
  std::string phi_col = "phi";
  std::string year_col = "year";
  double speed_floor = 0.01;  // calms are clamped up to this speed
};

struct IngestResult {
  BlockedDataset data;
  std::size_t skipped = 0;  // rows with missing or non-finite values
};

inline IngestResult ingest(const std::filesystem::path& path,
                           const IngestOptions& opts = {}) {
  if (opts.format == InputFormat::Polar && !opts.unit) {
    throw IngestError("polar input requires an explicit angle unit flag");
  }
  const CsvTable table = read_csv(path);
  const auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < table.headers.size(); ++i) {
      if (table.headers[i] == name) return i;
    }
    throw IngestError("missing required column '" + name + "' in " + path.string());
  };

  std::size_t c_year = column(opts.year_col);
  std::size_t c_a = 0, c_b = 0;
  if (opts.format == InputFormat::Uv) {
    c_a = column(opts.u_col);
    c_b = column(opts.v_col);
  } else {
    c_a = column(opts.r_col);
    c_b = column(opts.phi_col);
  }

  IngestResult out;
  std::vector<WindSample> samples;
  for (const auto& row : table.rows) {
    const std::size_t needed = std::max({c_a, c_b, c_year});
    if (row.size() <= needed) {
      ++out.skipped;
      continue;
    }
    const std::optional<double> a = parse_double(row[c_a]);
    const std::optional<double> b = parse_double(row[c_b]);
    const std::optional<double> year = parse_double(row[c_year]);
    if (!a || !b || !year || !std::isfinite(*a) || !std::isfinite(*b) ||
        !std::isfinite(*year)) {
      ++out.skipped;
      continue;
    }
    WindSample s;
    s.year = static_cast<int>(*year);
    if (opts.format == InputFormat::Uv) {
      const RPhi polar = to_polar(*a, *b);
      s.speed = polar.r;
      s.direction = polar.phi;
    } else {
      if (*a < 0.0) {
        ++out.skipped;
        continue;
      }
      s.speed = *a;
      s.direction = (*opts.unit == AngleUnit::Degrees) ? Angle::from_degrees(*b)
                                                       : Angle::from_radians(*b);
    }
    if (s.speed < opts.speed_floor) s.speed = opts.speed_floor;
    samples.push_back(s);
  }
  if (samples.empty()) {
    throw IngestError("no valid data rows in " + path.string());
  }
  out.data = make_blocked(std::move(samples));
  return out;
}

}  // namespace windcond
