#pragma once

#include <functional>

namespace gmclab {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  int max_depth = 48;
};

/// Adaptive Simpson with Richardson correction. Throws NumericError when the
/// tolerance cannot be met within max_depth.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        const QuadratureOptions& opt = {});

}  // namespace gmclab
