#pragma once

#include <stdexcept>
#include <string>

namespace fpd {

/// Bad inputs, shapes or configuration. Maps to exit code 1 in the CLI.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure (singular operator, iteration cap, non-finite result).
/// Maps to exit code 2 in the CLI.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / format failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fpd
