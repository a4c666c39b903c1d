#pragma once

#include <stdexcept>
#include <string>

namespace dsmc {

/// Bad user input: malformed config, unknown task, inconsistent sizes.
/// The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerics went off the rails (non-finite state, factorization failure).
/// The CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace dsmc
