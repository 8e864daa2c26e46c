#pragma once

#include <stdexcept>
#include <string>

namespace gwae {

/// Bad user input: config keys, file paths, shape mismatches at API boundaries.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: NaN/Inf produced, solver non-convergence, domain errors.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File format or filesystem failure.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gwae
