#pragma once

#include <stdexcept>
#include <string>

namespace slope_amp {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNumericFailure = 3,
  kNonConvergence = 4,
  kCalibrationError = 5,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::kConfigError; }
};

/// Bad arguments: mismatched lengths, invalid sequences, bad configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up in an iterate.
class NumericFailure : public Error {
 public:
  NumericFailure(int iteration, const std::string& quantity)
      : Error("numeric failure at iteration " + std::to_string(iteration) +
              ": non-finite " + quantity),
        iteration_(iteration),
        quantity_(quantity) {}
  int iteration() const noexcept { return iteration_; }
  const std::string& quantity() const noexcept { return quantity_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kNumericFailure; }

 private:
  int iteration_;
  std::string quantity_;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNonConvergence; }
};

/// f(alpha) >= delta: the state-evolution map has no finite fixed point.
class AlphaBelowAmin : public Error {
 public:
  AlphaBelowAmin(double f_value, double delta)
      : Error("threshold direction is not above the A_min boundary: f(alpha) = " +
              std::to_string(f_value) + " >= delta = " + std::to_string(delta)),
        f_value_(f_value) {}
  double f_value() const noexcept { return f_value_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kCalibrationError; }

 private:
  double f_value_;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kCalibrationError; }
};

}  // namespace slope_amp
