// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_ERRORS_HPP
#define GUSTROM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace gustrom {

// Diagnostic categories. The CLI maps each category to its own exit code.
enum class ErrorCategory : int {
  config = 2,
  contract = 3,
  numerical = 4,
  solver = 5,
  reduction = 6,
  divergence = 7,
  io = 8,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

// Malformed configuration input (bad syntax, unknown keys, invalid values).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

// A caller broke an interface precondition (dimension mismatch, bad range).
class ContractViolation : public Error {
public:
  explicit ContractViolation(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

// A computation produced a non-finite value. `index` is the offending
// component when known, -1 otherwise.
class NumericalFailure : public Error {
public:
  NumericalFailure(const std::string& what, long index = -1)
      : Error(ErrorCategory::numerical, what), index_(index) {}
  long index() const noexcept { return index_; }

private:
  long index_;
};

// An iterative solver failed (singular Jacobian, stalled residual).
class SolverError : public Error {
public:
  explicit SolverError(const std::string& what) : Error(ErrorCategory::solver, what) {}
};

// Model reduction could not deliver a usable basis or coefficient set.
class ReductionError : public Error {
public:
  explicit ReductionError(const std::string& what) : Error(ErrorCategory::reduction, what) {}
};

// Time integration left the finite range. Carries the time of the failed
// step and the last fully finite state for post-mortem reporting.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, double time, std::vector<double> last_state)
      : Error(ErrorCategory::divergence, what), time_(time), last_state_(std::move(last_state)) {}
  double time() const noexcept { return time_; }
  const std::vector<double>& last_state() const noexcept { return last_state_; }

private:
  double time_;
  std::vector<double> last_state_;
};

// Filesystem or serialization failure.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

} // namespace gustrom

#endif // GUSTROM_ERRORS_HPP
