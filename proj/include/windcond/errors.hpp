#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace windcond {

/// Base class for all library errors. `kind()` is a stable machine-readable
/// tag used by the CLI when emitting error JSON.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class InsufficientDataError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "insufficient_data"; }
};

class DegenerateSampleError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate_sample"; }
};

class InsufficientBinsError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "insufficient_bins"; }
};

class SingularDesignError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "singular_design"; }
};

/// A fitted parameter curve went nonpositive somewhere on the direction grid.
class InvalidCurveError : public Error {
public:
  InvalidCurveError(const std::string& parameter, double angle_rad, double value)
      : Error("fitted " + parameter + " curve is nonpositive (" +
              std::to_string(value) + ") at direction " + std::to_string(angle_rad) + " rad"),
        parameter_(parameter), angle_rad_(angle_rad), value_(value) {}
  const char* kind() const noexcept override { return "invalid_curve"; }
  const std::string& parameter() const noexcept { return parameter_; }
  double angle_rad() const noexcept { return angle_rad_; }
  double value() const noexcept { return value_; }

private:
  std::string parameter_;
  double angle_rad_;
  double value_;
};

class ComponentCollapseError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "component_collapse"; }
};

class QuadratureError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "quadrature_failure"; }
};

class UnderdeterminedError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "underdetermined"; }
};

/// Solver failed to converge; carries the last iterate so callers can inspect it.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& msg, std::vector<double> last_iterate)
      : Error(msg), last_iterate_(std::move(last_iterate)) {}
  const char* kind() const noexcept override { return "non_convergence"; }
  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
  std::vector<double> last_iterate_;
};

/// Too many bootstrap replicates failed for the band to be trustworthy.
class UnstableStatisticError : public Error {
public:
  UnstableStatisticError(const std::string& msg, std::vector<std::string> failure_log)
      : Error(msg), failure_log_(std::move(failure_log)) {}
  const char* kind() const noexcept override { return "unstable_statistic"; }
  const std::vector<std::string>& failure_log() const noexcept { return failure_log_; }

private:
  std::vector<std::string> failure_log_;
};

class GridMismatchError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "grid_mismatch"; }
};

/// Relative error is undefined where the truth curve vanishes under positive weight.
class ZeroTruthError : public Error {
public:
  ZeroTruthError(double angle_rad)
      : Error("truth curve is zero under positive weight at direction " +
              std::to_string(angle_rad) + " rad"),
        angle_rad_(angle_rad) {}
  const char* kind() const noexcept override { return "zero_truth_value"; }
  double angle_rad() const noexcept { return angle_rad_; }

private:
  double angle_rad_;
};

class IngestError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "ingest_error"; }
};

class ConfigError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

}  // namespace windcond
