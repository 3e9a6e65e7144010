#pragma once

#include <stdexcept>
#include <string>

namespace admmopt {

/// Malformed or inconsistent run configuration / search-space document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path), detail_(what) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string path_;
  std::string detail_;
};

/// A single candidate could not be evaluated (crash, timeout, error reply).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The evaluator replied with something that does not follow the wire protocol.
class ProtocolError : public EvaluationError {
 public:
  ProtocolError(const std::string& what, std::string raw_line)
      : EvaluationError(what), raw_line_(std::move(raw_line)) {}

  const std::string& raw_line() const noexcept { return raw_line_; }

 private:
  std::string raw_line_;
};

class TimeoutError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// The evaluator backend is gone and could not be restarted.
class EvaluatorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown from inside the evaluation path when the evaluation or time budget is used up.
class BudgetExhausted : public std::runtime_error {
 public:
  BudgetExhausted() : std::runtime_error("evaluation budget exhausted") {}
};

}  // namespace admmopt
