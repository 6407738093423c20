#include "gmclab/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>

#include "gmclab/errors.hpp"
#include "gmclab/simd/kernels.hpp"

namespace gmclab {

namespace {
bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }
std::uint64_t dbits(double v) { return std::bit_cast<std::uint64_t>(v); }
}  // namespace

GridSpec::GridSpec(int n_, int pad) : n(n_), pad_factor(pad) {
  if (!is_pow2(n)) throw ConfigError("grid n must be a power of two");
  if (pad_factor < 2) throw ConfigError("pad_factor must be >= 2");
  if (!is_pow2(n * pad_factor)) throw ConfigError("padded grid must be a power of two");
}

bool GridSpec::resolves(double t) const {
  return spacing() <= std::exp(-t) / 4.0 * (1.0 + 1e-12);
}

int GridSpec::required_n(double t) {
  int n = 2;
  while (1.0 / n > std::exp(-t) / 4.0 && n < (1 << 24)) n *= 2;
  return n;
}

ScaleSchedule ScaleSchedule::uniform(double t, double delta) {
  if (t < 0 || delta <= 0) throw ConfigError("schedule: t >= 0 and delta > 0 required");
  ScaleSchedule s;
  s.breakpoints.push_back(0.0);
  int k = std::max(1, static_cast<int>(std::ceil(t / delta - 1e-9)));
  for (int i = 1; i < k; ++i) s.breakpoints.push_back(t * i / k);
  if (t > 0) s.breakpoints.push_back(t);
  return s;
}

ScaleSchedule ScaleSchedule::from_breakpoints(std::vector<double> pts) {
  if (pts.empty() || pts.front() != 0.0)
    throw ConfigError("schedule must start at 0");
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i] <= pts[i - 1]) throw ConfigError("schedule breakpoints must increase");
  ScaleSchedule s;
  s.breakpoints = std::move(pts);
  return s;
}

FieldSample FieldSample::zeros(const GridSpec& g) {
  FieldSample f;
  f.grid = g;
  f.values.assign(g.cells(), 0.0);
  return f;
}

void SampleWorkspace::ensure(std::size_t m2) {
  if (cap >= m2) return;
  freq = make_complex_buf(m2);
  spat = make_complex_buf(m2);
  cap = m2;
}

// ---- StationarySampler ----------------------------------------------------

namespace {
constexpr double kPsdRelTol = 1e-10;   // eigenvalue clip window, relative to max
constexpr double kClipBudget = 1e-6;   // max clipped spectral mass fraction

std::vector<double> torus_eigenvalues(const RadialKernel& cov, int m, double spacing) {
  const std::size_t mm = static_cast<std::size_t>(m) * m;
  ComplexBuf in = make_complex_buf(mm);
  ComplexBuf out = make_complex_buf(mm);
  for (int i = 0; i < m; ++i) {
    double di = std::min(i, m - i) * spacing;
    for (int j = 0; j < m; ++j) {
      double dj = std::min(j, m - j) * spacing;
      in[static_cast<std::size_t>(i) * m + j] = {cov(std::hypot(di, dj)), 0.0};
    }
  }
  const Fft2D& fft = Fft2D::get(m);
  fft.forward(in.get(), out.get());
  std::vector<double> eig(mm);
  double max_abs = 0;
  double max_imag = 0;
  for (std::size_t k = 0; k < mm; ++k) {
    eig[k] = out[k].real();
    max_abs = std::max(max_abs, std::abs(eig[k]));
    max_imag = std::max(max_imag, std::abs(out[k].imag()));
  }
  if (max_imag > 1e-9 * std::max(max_abs, 1e-300))
    throw NumericError("circulant embedding produced non-real eigenvalues");
  return eig;
}
}  // namespace

StationarySampler::StationarySampler(const RadialKernel& cov, const GridSpec& grid,
                                     double spacing)
    : n_(grid.n) {
  int pad = grid.pad_factor;
  for (int attempt = 0;; ++attempt) {
    m_ = grid.n * pad;
    if (m_ * spacing < 2.0 * cov.support_radius() * (1.0 - 1e-12))
      throw ConfigError("padded torus smaller than twice the covariance support");
    std::vector<double> eig = torus_eigenvalues(cov, m_, spacing);
    double max_eig = *std::max_element(eig.begin(), eig.end());
    min_eig_ = *std::min_element(eig.begin(), eig.end());
    if (min_eig_ < -kPsdRelTol * max_eig) {
      if (attempt == 0) {  // standard remedy: double the padding once
        pad *= 2;
        continue;
      }
      throw NumericError("circulant embedding not positive semidefinite: min eigenvalue " +
                         std::to_string(min_eig_) + " with padding " + std::to_string(pad));
    }
    finalize_eigenvalues(eig, pad);
    return;
  }
}

StationarySampler::StationarySampler(const std::function<double(double)>& density,
                                     const GridSpec& grid, double spacing)
    : n_(grid.n), m_(grid.padded()) {
  const int m = m_;
  const double torus_len = m * spacing;
  std::vector<double> eig(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    double ki = (i < m / 2 ? i : i - m) / torus_len;
    for (int j = 0; j < m; ++j) {
      double kj = (j < m / 2 ? j : j - m) / torus_len;
      eig[static_cast<std::size_t>(i) * m + j] =
          density(std::hypot(ki, kj)) / (spacing * spacing);
    }
  }
  min_eig_ = *std::min_element(eig.begin(), eig.end());
  if (min_eig_ < 0) throw NumericError("spectral density must be nonnegative");
  finalize_eigenvalues(eig, grid.pad_factor);
}

void StationarySampler::finalize_eigenvalues(std::vector<double>& eig, int /*pad_used*/) {
  double total = 0, clipped = 0;
  for (double v : eig) {
    if (v > 0)
      total += v;
    else
      clipped += -v;
  }
  clipped_fraction_ = total > 0 ? clipped / total : 0.0;
  if (clipped_fraction_ >= kClipBudget)
    throw NumericError("clipped spectral mass fraction " + std::to_string(clipped_fraction_) +
                       " exceeds budget");
  sqrt_eig_over_m_.resize(eig.size());
  const double inv_m = 1.0 / m_;
  for (std::size_t k = 0; k < eig.size(); ++k)
    sqrt_eig_over_m_[k] = eig[k] > 0 ? std::sqrt(eig[k]) * inv_m : 0.0;
}

void StationarySampler::sample_pair(NormalSource& src, SampleWorkspace& ws,
                                    std::span<double> a, std::span<double> b) const {
  const std::size_t mm = static_cast<std::size_t>(m_) * m_;
  const std::size_t nn = static_cast<std::size_t>(n_) * n_;
  if (a.size() != nn || b.size() != nn)
    throw ConfigError("sample_pair: output span size mismatch");
  ws.ensure(mm);

  // complex white noise directly in the spectral domain; Re/Im of the
  // back-transform are two independent replicas
  src.fill(reinterpret_cast<double*>(ws.freq.get()), 2 * mm);
  for (std::size_t k = 0; k < mm; ++k) ws.freq[k] *= sqrt_eig_over_m_[k];
  Fft2D::get(m_).backward(ws.freq.get(), ws.spat.get());

  for (int i = 0; i < n_; ++i) {
    const std::complex<double>* row = ws.spat.get() + static_cast<std::size_t>(i) * m_;
    double* pa = a.data() + static_cast<std::size_t>(i) * n_;
    double* pb = b.data() + static_cast<std::size_t>(i) * n_;
    for (int j = 0; j < n_; ++j) {
      pa[j] = row[j].real();
      pb[j] = row[j].imag();
    }
  }
}

// ---- FieldContext ---------------------------------------------------------

FieldContext::FieldContext(const MollifierSpec& spec) : rho_(build_mollifier(spec)) {}
FieldContext::FieldContext(RadialKernel rho) : rho_(std::move(rho)) {}

const LayerCovariance& FieldContext::layer(double s_lo, double s_hi) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto key = std::make_pair(dbits(s_lo), dbits(s_hi));
  auto it = layers_.find(key);
  if (it == layers_.end()) {
    auto lc = std::make_unique<LayerCovariance>(layer_covariance(rho_, s_lo, s_hi));
    it = layers_.emplace(key, std::move(lc)).first;
  }
  return *it->second;
}

const StationarySampler& FieldContext::layer_sampler(double s_lo, double s_hi,
                                                     const GridSpec& grid,
                                                     double spacing) const {
  // grid must resolve the layer's finest scale (relative to its own spacing)
  if (spacing > std::exp(-(s_hi - s_lo)) / 4.0 * (1.0 + 1e-12))
    throw ConfigError("grid too coarse for the requested scale: need spacing <= e^-t/4");
  const LayerCovariance& cov = layer(s_lo, s_hi);
  std::lock_guard<std::mutex> lock(mutex_);
  std::array<std::uint64_t, 4> key{dbits(s_lo), dbits(s_hi),
                                   (static_cast<std::uint64_t>(grid.n) << 32) |
                                       static_cast<std::uint64_t>(grid.pad_factor),
                                   dbits(spacing)};
  auto it = samplers_.find(key);
  if (it == samplers_.end()) {
    auto sp = std::make_unique<StationarySampler>(cov.kernel, grid, spacing);
    it = samplers_.emplace(key, std::move(sp)).first;
  }
  return *it->second;
}

const StationarySampler& FieldContext::smooth_z_sampler(const GridSpec& grid) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::array<std::uint64_t, 2> key{(static_cast<std::uint64_t>(grid.n) << 32) |
                                       static_cast<std::uint64_t>(grid.pad_factor),
                                   dbits(grid.spacing())};
  auto it = z_samplers_.find(key);
  if (it == z_samplers_.end()) {
    auto density = [](double xi) { return spectral_kernel_R(2, xi); };
    auto sp = std::make_unique<StationarySampler>(density, grid, grid.spacing());
    it = z_samplers_.emplace(key, std::move(sp)).first;
  }
  return *it->second;
}

std::pair<FieldSample, FieldSample> FieldContext::sample_layer_pair(
    const LayerCovariance& cov, const GridSpec& grid, const RngStream& rng,
    SampleWorkspace& ws) const {
  FieldSample a = FieldSample::zeros(grid), b = FieldSample::zeros(grid);
  a.scale_lo = b.scale_lo = cov.s_lo;
  a.scale_hi = b.scale_hi = cov.s_hi;
  a.seed_path = b.seed_path = rng.path();
  if (cov.s_hi > cov.s_lo) {
    const StationarySampler& sampler =
        layer_sampler(cov.s_lo, cov.s_hi, grid, grid.spacing());
    NormalSource src(rng);
    sampler.sample_pair(src, ws, a.values, b.values);
  }
  return {std::move(a), std::move(b)};
}

FieldSample FieldContext::sample_layer(const LayerCovariance& cov, const GridSpec& grid,
                                       const RngStream& rng, SampleWorkspace& ws) const {
  return sample_layer_pair(cov, grid, rng, ws).first;
}

std::pair<FieldSample, FieldSample> FieldContext::sample_field_pair(
    double t, const ScaleSchedule& sched, const GridSpec& grid, const RngStream& rng,
    SampleWorkspace& ws) const {
  if (t < 0) throw ConfigError("sample_field: t >= 0 required");
  FieldSample a = FieldSample::zeros(grid), b = FieldSample::zeros(grid);
  a.scale_hi = b.scale_hi = t;
  a.seed_path = b.seed_path = rng.path();
  if (t == 0) return {std::move(a), std::move(b)};
  if (std::abs(sched.total() - t) > 1e-12)
    throw ConfigError("schedule does not end at the requested scale");
  if (!grid.resolves(t))
    throw ConfigError("grid too coarse for the requested scale: need spacing <= e^-t/4");

  std::vector<double> la(grid.cells()), lb(grid.cells());
  const auto& k = simd::active();
  for (std::size_t ell = 0; ell + 1 < sched.breakpoints.size(); ++ell) {
    const StationarySampler& sampler = layer_sampler(
        sched.breakpoints[ell], sched.breakpoints[ell + 1], grid, grid.spacing());
    NormalSource src(rng.sub(ell));
    sampler.sample_pair(src, ws, la, lb);
    k.add_inplace(a.values.data(), la.data(), la.size());
    k.add_inplace(b.values.data(), lb.data(), lb.size());
  }
  return {std::move(a), std::move(b)};
}

FieldSample FieldContext::sample_field(double t, const ScaleSchedule& sched,
                                       const GridSpec& grid, const RngStream& rng,
                                       SampleWorkspace& ws) const {
  return sample_field_pair(t, sched, grid, rng, ws).first;
}

std::pair<FieldSample, FieldSample> FieldContext::sample_increment_pair(
    double s, double t, const GridSpec& grid, const RngStream& rng,
    SampleWorkspace& ws) const {
  if (!(s >= 0) || !(t > s)) throw ConfigError("increment: 0 <= s < t required");
  FieldSample a = FieldSample::zeros(grid), b = FieldSample::zeros(grid);
  a.scale_lo = b.scale_lo = s;
  a.scale_hi = b.scale_hi = t;
  a.seed_path = b.seed_path = rng.path();
  // law of the increment on S == depth-(t-s) field read at spacing e^s h
  const StationarySampler& sampler =
      layer_sampler(0.0, t - s, grid, std::exp(s) * grid.spacing());
  NormalSource src(rng);
  sampler.sample_pair(src, ws, a.values, b.values);
  return {std::move(a), std::move(b)};
}

FieldSample FieldContext::sample_increment_by_scaling(double s, double t,
                                                      const GridSpec& grid,
                                                      const RngStream& rng,
                                                      SampleWorkspace& ws) const {
  return sample_increment_pair(s, t, grid, rng, ws).first;
}

std::pair<FieldSample, FieldSample> FieldContext::sample_smooth_z_pair(
    const GridSpec& grid, double amplitude, const RngStream& rng,
    SampleWorkspace& ws) const {
  if (amplitude < 0) throw ConfigError("smooth field amplitude must be >= 0");
  FieldSample a = FieldSample::zeros(grid), b = FieldSample::zeros(grid);
  a.seed_path = b.seed_path = rng.path();
  if (amplitude == 0) return {std::move(a), std::move(b)};
  const StationarySampler& sampler = smooth_z_sampler(grid);
  NormalSource src(rng);
  sampler.sample_pair(src, ws, a.values, b.values);
  const double scale = std::sqrt(amplitude);
  for (auto& v : a.values) v *= scale;
  for (auto& v : b.values) v *= scale;
  return {std::move(a), std::move(b)};
}

FieldSample FieldContext::sample_smooth_z(const GridSpec& grid, double amplitude,
                                          const RngStream& rng, SampleWorkspace& ws) const {
  return sample_smooth_z_pair(grid, amplitude, rng, ws).first;
}

// ---- gradient -------------------------------------------------------------

namespace {
double grad_sup_impl(const FieldSample& field, const double* tilt) {
  const int n = field.grid.n;
  if (n < 2) throw ConfigError("gradient_sup: need n >= 2");
  const double h = field.grid.spacing();
  auto value = [&](int i, int j) {
    std::size_t idx = static_cast<std::size_t>(i) * n + j;
    return field.values[idx] + (tilt ? tilt[idx] : 0.0);
  };
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double gx, gy;
      if (i == 0)
        gx = (value(1, j) - value(0, j)) / h;
      else if (i == n - 1)
        gx = (value(n - 1, j) - value(n - 2, j)) / h;
      else
        gx = (value(i + 1, j) - value(i - 1, j)) / (2.0 * h);
      if (j == 0)
        gy = (value(i, 1) - value(i, 0)) / h;
      else if (j == n - 1)
        gy = (value(i, n - 1) - value(i, n - 2)) / h;
      else
        gy = (value(i, j + 1) - value(i, j - 1)) / (2.0 * h);
      best = std::max(best, gx * gx + gy * gy);
    }
  }
  return std::sqrt(best);
}
}  // namespace

double gradient_sup(const FieldSample& field) { return grad_sup_impl(field, nullptr); }

double gradient_sup(const FieldSample& field, std::span<const double> tilt) {
  if (tilt.size() != field.grid.cells())
    throw ConfigError("gradient_sup: tilt size mismatch");
  return grad_sup_impl(field, tilt.data());
}

}  // namespace gmclab
