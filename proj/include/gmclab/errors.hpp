#pragma once

#include <stdexcept>
#include <string>

namespace gmclab {

/// Invalid configuration or arguments. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numerical precondition failed at run time (non-PSD embedding, divergent
/// integral, quadrature non-convergence, fully censored experiment).
/// CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gmclab
