#include "gmclab/quadrature.hpp"

#include <cmath>

#include "gmclab/errors.hpp"

namespace gmclab {
namespace {

struct Simpson {
  const std::function<double(double)>& f;
  bool converged = true;

  double recurse(double a, double m, double b, double fa, double fm, double fb,
                 double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double h6 = (b - a) / 12.0;
    double left = h6 * (fa + 4.0 * flm + fm);
    double right = h6 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || depth <= 0) {
      if (depth <= 0 && std::abs(delta) > 15.0 * tol) converged = false;
      return left + right + delta / 15.0;
    }
    return recurse(a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           recurse(m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  }
};

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        const QuadratureOptions& opt) {
  if (a == b) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  Simpson s{f};
  double v = s.recurse(a, m, b, fa, fm, fb, whole, opt.abs_tol, opt.max_depth);
  if (!s.converged) throw NumericError("quadrature did not converge");
  return v;
}

}  // namespace gmclab
