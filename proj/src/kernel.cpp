#include "gmclab/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "gmclab/errors.hpp"
#include "gmclab/fft.hpp"
#include "gmclab/quadrature.hpp"

namespace gmclab {

MollifierSpec MollifierSpec::standard_bump() {
  MollifierSpec spec;
  spec.name = "bump";
  spec.base_profile = [](double r) {
    double z = 2.0 * r;
    if (z >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - z * z));
  };
  return spec;
}

RadialKernel::RadialKernel(std::vector<double> values, double r_max, double support_radius)
    : values_(std::move(values)), r_max_(r_max), support_(support_radius) {
  if (values_.size() < 4 || r_max_ <= 0)
    throw ConfigError("radial kernel table needs >= 4 nodes and positive extent");
  dr_ = r_max_ / static_cast<double>(values_.size() - 1);
  inv_dr_ = 1.0 / dr_;
}

double RadialKernel::operator()(double r) const {
  if (r >= support_) return 0.0;
  if (r < 0) r = -r;
  double u = r * inv_dr_;
  auto i = static_cast<std::ptrdiff_t>(u);
  auto last = static_cast<std::ptrdiff_t>(values_.size()) - 1;
  if (i >= last) return values_.back();
  double t = u - static_cast<double>(i);
  if (t == 0.0) return values_[static_cast<std::size_t>(i)];  // node-exact
  // Catmull-Rom; ghost nodes: even reflection at r=0, zero beyond the table
  auto get = [&](std::ptrdiff_t k) -> double {
    if (k < 0) return values_[static_cast<std::size_t>(-k)];
    if (k > last) return 0.0;
    return values_[static_cast<std::size_t>(k)];
  };
  double p0 = get(i - 1), p1 = get(i), p2 = get(i + 1), p3 = get(i + 2);
  double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

RadialKernel build_mollifier(const MollifierSpec& spec) {
  if (!spec.base_profile) throw ConfigError("mollifier base profile not set");
  if (spec.table_resolution < 16) throw ConfigError("mollifier table too coarse");
  if (spec.dimension != 2) throw ConfigError("mollifier build supports d = 2 only");

  // Dense 2-D self-convolution on a [-1,1) grid via FFT, then radial
  // extraction along the axes and resampling onto the output table.
  constexpr int kGrid = 2048;            // build grid, spacing 2/kGrid
  const double delta = 2.0 / kGrid;
  const int m = kGrid;
  const std::size_t mm = static_cast<std::size_t>(m) * m;

  ComplexBuf in = make_complex_buf(mm);
  ComplexBuf out = make_complex_buf(mm);
  for (int i = 0; i < m; ++i) {
    double x = (i < m / 2 ? i : i - m) * delta;
    for (int j = 0; j < m; ++j) {
      double y = (j < m / 2 ? j : j - m) * delta;
      double r = std::sqrt(x * x + y * y);
      in[static_cast<std::size_t>(i) * m + j] = {r < 0.5 ? spec.base_profile(r) : 0.0, 0.0};
    }
  }
  const Fft2D& fft = Fft2D::get(m);
  fft.forward(in.get(), out.get());
  for (std::size_t k = 0; k < mm; ++k) {
    std::complex<double> v = out[k];
    in[k] = v * v;
  }
  fft.backward(in.get(), out.get());
  // conv(x_j) = delta^2 / m^2 * out[j]
  const double scale = delta * delta / static_cast<double>(mm);

  // radial profile at radii i*delta, averaged over the four axis directions
  const int half = m / 2;  // radius half*delta = 1.0 == support edge
  std::vector<double> profile(static_cast<std::size_t>(half) + 1);
  for (int i = 0; i <= half; ++i) {
    int neg = (m - i) % m;
    double v = out[static_cast<std::size_t>(i)].real() + out[static_cast<std::size_t>(neg)].real() +
               out[static_cast<std::size_t>(i) * m].real() +
               out[static_cast<std::size_t>(neg) * m].real();
    profile[static_cast<std::size_t>(i)] = 0.25 * v * scale;
  }

  double peak = profile[0];
  if (!(peak > 0) || !std::isfinite(peak))
    throw NumericError("invalid mollifier: self-convolution failed to normalize");
  for (auto& v : profile) v /= peak;

  RadialKernel coarse(profile, 1.0, 1.0);
  std::vector<double> table(static_cast<std::size_t>(spec.table_resolution));
  const double dr = 1.0 / static_cast<double>(spec.table_resolution - 1);
  table[0] = 1.0;  // rho(0) = 1 exactly after normalization
  for (int i = 1; i < spec.table_resolution; ++i)
    table[static_cast<std::size_t>(i)] = coarse(static_cast<double>(i) * dr);
  table.back() = 0.0;

  for (double v : table)
    if (!std::isfinite(v) || v < -1e-9 || v > 1.0 + 1e-9)
      throw NumericError("invalid mollifier: table value out of [0, 1]");

  return RadialKernel(std::move(table), 1.0, 1.0);
}

double eval_k0(const RadialKernel& rho, double r) {
  if (r < 0) throw ConfigError("eval_k0: negative radius");
  if (r == 0.0) throw NumericError("eval_k0: integral diverges at r = 0");
  if (r >= rho.support_radius()) return 0.0;
  double umax = -std::log(r);
  return adaptive_simpson([&](double u) { return rho(std::exp(u) * r); }, 0.0, umax);
}

double eval_g0(const RadialKernel& rho, double r) {
  if (r < 0) throw ConfigError("eval_g0: negative radius");
  if (r >= 1.0) return 0.0;
  // g0(r) = int_{r^2}^{1} (f(t) - 1) / (2t) dt with f(t) = rho(sqrt(t)).
  // Substituting t = v^2 gives int_r^1 (rho(v) - 1) / v dv, whose integrand
  // extends continuously by 0 at v = 0 (rho has a critical point at 0).
  auto integrand = [&](double v) {
    if (v <= 0.0) return 0.0;
    return (rho(v) - 1.0) / v;
  };
  return adaptive_simpson(integrand, r, 1.0);
}

LayerCovariance layer_covariance(const RadialKernel& rho, double s_lo, double s_hi) {
  if (!(s_lo >= 0) || !(s_hi > s_lo))
    throw ConfigError("layer_covariance: requires 0 <= s_lo < s_hi");

  const double support = std::exp(-s_lo) * rho.support_radius();
  // The kernel's fourth derivative grows like e^{4(s_hi-s_lo)}; keep the
  // cubic-interpolation error of the table below ~1e-10.
  const int n_nodes = static_cast<int>(
      std::clamp(2300.0 * std::exp(s_hi - s_lo), 8192.0, 262144.0));
  std::vector<double> table(static_cast<std::size_t>(n_nodes) + 1);
  const double dr = support / n_nodes;
  table[0] = s_hi - s_lo;
  for (int i = 1; i <= n_nodes; ++i) {
    double r = static_cast<double>(i) * dr;
    double u_hi = std::min(s_hi, std::log(rho.support_radius() / r));
    if (u_hi <= s_lo) {
      table[static_cast<std::size_t>(i)] = 0.0;
      continue;
    }
    table[static_cast<std::size_t>(i)] =
        adaptive_simpson([&](double u) { return rho(std::exp(u) * r); }, s_lo, u_hi);
  }
  table.back() = 0.0;

  LayerCovariance layer;
  layer.s_lo = s_lo;
  layer.s_hi = s_hi;
  layer.variance = s_hi - s_lo;
  layer.kernel = RadialKernel(std::move(table), support, support);
  return layer;
}

double scale_integral(const RadialKernel& rho, double s_lo, double s_hi, double r) {
  if (s_hi <= s_lo) return 0.0;
  if (r == 0.0) return s_hi - s_lo;
  if (r >= std::exp(-s_lo) * rho.support_radius()) return 0.0;
  double u_hi = std::min(s_hi, std::log(rho.support_radius() / r));
  if (u_hi <= s_lo) return 0.0;
  return adaptive_simpson([&](double u) { return rho(std::exp(u) * r); }, s_lo, u_hi);
}

double estimate_bound_A(const RadialKernel& rho, std::span<const double> t_grid,
                        std::span<const double> r_grid) {
  if (t_grid.empty() || r_grid.empty()) throw ConfigError("estimate_bound_A: empty grid");
  double worst = 0.0;
  for (double t : t_grid) {
    for (double r : r_grid) {
      double cov = scale_integral(rho, 0.0, t, r);
      double log_profile = r > 0 ? std::max(-std::log(r), 0.0) : HUGE_VAL;
      worst = std::max(worst, std::abs(cov - std::min(t, log_profile)));
    }
  }
  return worst;
}

double spectral_kernel_R(int d, double xi) {
  if (xi < 0) throw ConfigError("spectral_kernel_R: negative frequency");
  return std::pow(1.0 + xi * xi, -0.5 * d - 2.0);
}

}  // namespace gmclab
