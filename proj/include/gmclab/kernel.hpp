#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gmclab {

/// Seed bump for the mollifier. The covariance seed rho is the normalized
/// self-convolution (psi * psi) / (psi * psi)(0), which is positive definite
/// by construction and supported in the unit ball when psi is supported in
/// the ball of radius 1/2.
struct MollifierSpec {
  std::string name = "bump";
  std::function<double(double)> base_profile;  // psi(r), zero for r >= 1/2
  int table_resolution = 4096;
  int dimension = 2;

  static MollifierSpec standard_bump();
};

/// Tabulated radial function on a uniform grid over [0, r_max] with
/// Catmull-Rom (cubic, node-exact) interpolation. Evaluates to exactly 0 at
/// and beyond support_radius.
class RadialKernel {
 public:
  RadialKernel() = default;
  RadialKernel(std::vector<double> values, double r_max, double support_radius);

  double operator()(double r) const;

  double r_max() const { return r_max_; }
  double support_radius() const { return support_; }
  int size() const { return static_cast<int>(values_.size()); }
  double node_radius(int i) const { return static_cast<double>(i) * dr_; }
  double node_value(int i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
  double r_max_ = 0;
  double support_ = 0;
  double dr_ = 0;
  double inv_dr_ = 0;
};

/// Covariance of one scale layer: c(r) = integral of rho(e^u r) over
/// u in [s_lo, s_hi]. Vanishes for r >= e^{-s_lo}; c(0) = s_hi - s_lo.
struct LayerCovariance {
  double s_lo = 0;
  double s_hi = 0;
  RadialKernel kernel;
  double variance = 0;

  double operator()(double r) const { return kernel(r); }
};

RadialKernel build_mollifier(const MollifierSpec& spec);

/// K0(r) = integral over u >= 0 of rho(e^u r); 0 for r >= 1; diverges at r=0.
double eval_k0(const RadialKernel& rho, double r);

/// Smooth remainder: g0(r) = K0(r) + ln r for 0 < r < 1, extended to r = 0.
double eval_g0(const RadialKernel& rho, double r);

LayerCovariance layer_covariance(const RadialKernel& rho, double s_lo, double s_hi);

/// Direct quadrature of the layer integral at a single radius (no table).
double scale_integral(const RadialKernel& rho, double s_lo, double s_hi, double r);

/// Grid maximum of |c_{0,t}(r) - min(t, ln_+(1/r))|: an empirical stand-in
/// for the uniform bound between the truncated kernel and the exact
/// log-profile. The true bound is >= this value.
double estimate_bound_A(const RadialKernel& rho, std::span<const double> t_grid,
                        std::span<const double> r_grid);

/// Spectral density (1 + xi^2)^{-d/2-2} of the smooth C^1 perturbation field.
double spectral_kernel_R(int d, double xi);

}  // namespace gmclab
