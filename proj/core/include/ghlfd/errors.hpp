#pragma once

#include <stdexcept>
#include <string>

namespace ghlfd {

// Malformed or inconsistent input data (CSV, channel names, lengths, files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or a numerically degenerate problem.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters handed to an operation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ghlfd
