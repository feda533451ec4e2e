#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mot3d {

// Bad argument to a pure function (non-finite angle, NaN cost entry, r = 0).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Innovation covariance could not be factorized; the filter's P/R are mis-configured.
class FilterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a sequencing contract (e.g. non-increasing frame index).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A metric is undefined for the given input (num_gt == 0).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed input text. line() is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  // Same error with a location prefix such as a file name.
  ParseError(const std::string& prefix, const ParseError& inner)
      : std::runtime_error(prefix + ": " + inner.what()), line_(inner.line()) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structured input is missing a required field or column.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration value is out of range or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mot3d
