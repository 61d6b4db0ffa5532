#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mzc {

/// Malformed or inconsistent input data (files, records). Carries the
/// 1-based line number when the problem is tied to a specific line.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string &what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// File written by an incompatible schema version.
class SchemaVersionError : public DataError {
public:
  using DataError::DataError;
};

/// Invalid configuration tree (unknown keys, out-of-range values).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace mzc
