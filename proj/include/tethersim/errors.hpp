#pragma once

#include <stdexcept>
#include <string>

namespace tethersim {

// Bad scenario/parameter input. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Solver breakdown, NaN/divergence, singular input maps. CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A requested audit ran and failed. CLI exit code 4.
struct AuditError : std::runtime_error {
  explicit AuditError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tethersim
