#pragma once

#include <stdexcept>
#include <string>

namespace regimevar {

// Error taxonomy mirrors the CLI exit codes: config (2), data (3),
// numerical (4).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file does not match the declared column schema.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A cell could not be parsed; messages carry the offending row.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A regime lost effectively all responsibility mass during EM; the caller
/// is expected to retry with a fresh seed.
class RegimeCollapseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace regimevar
