#include "gmclab/gmc.hpp"

#include <algorithm>
#include <cmath>

#include "gmclab/errors.hpp"
#include "gmclab/simd/kernels.hpp"

namespace gmclab {

GmcParams::GmcParams(double a, double g, double t_scale, int dim) : d(dim), t(t_scale) {
  double bound = std::sqrt(2.0 * dim);
  if (!(a > 0) || !(g > 0) || !(a < bound) || !(g < bound))
    throw ConfigError("parameters must lie in (0, sqrt(2d))");
  if (a == g) throw ConfigError("parameters must be distinct");
  if (t_scale < 0) throw ConfigError("scale t must be >= 0");
  swapped = a > g;
  alpha = std::min(a, g);
  gamma = std::max(a, g);
}

double GmcParams::zeta(double p, double q) const {
  return 0.5 * alpha * alpha * p * p - (0.5 * alpha * alpha + d + alpha * gamma * q) * p +
         (0.5 * gamma * gamma + d) * q + 0.5 * gamma * gamma * q * q;
}

double GmcParams::zeta_balanced(int n) const {
  double den = gamma - alpha;
  return zeta(n * gamma / den, n * alpha / den);
}

double GmcParams::zeta_balanced_closed(int n) const {
  return (0.5 * alpha * gamma - d) * n;
}

double GmcParams::epsilon_shift() const { return d / (alpha * alpha) + 0.5; }

double GmcParams::zeta_min(int n) const {
  double a = 0.5 * alpha + d / alpha;
  return (gamma - alpha) * (0.5 * alpha - d / gamma) * n - 0.5 * a * a;
}

// ---- RegionMask -----------------------------------------------------------

RegionMask RegionMask::full(int n) {
  RegionMask m(n);
  std::fill(m.bits_.begin(), m.bits_.end(), static_cast<unsigned char>(1));
  m.rebuild_runs();
  return m;
}

RegionMask RegionMask::square(int n, int i0, int j0, int side) {
  if (i0 < 0 || j0 < 0 || side <= 0 || i0 + side > n || j0 + side > n)
    throw ConfigError("sub-square does not fit the grid");
  RegionMask m(n);
  for (int i = i0; i < i0 + side; ++i)
    for (int j = j0; j < j0 + side; ++j) m.set(i, j);
  m.rebuild_runs();
  return m;
}

void RegionMask::rebuild_runs() {
  runs_.clear();
  count_ = 0;
  for (int i = 0; i < n_; ++i) {
    std::size_t row = static_cast<std::size_t>(i) * n_;
    int j = 0;
    while (j < n_) {
      if (!bits_[row + j]) {
        ++j;
        continue;
      }
      int j0 = j;
      while (j < n_ && bits_[row + j]) ++j;
      runs_.push_back({row + j0, static_cast<std::size_t>(j - j0)});
      count_ += static_cast<std::size_t>(j - j0);
    }
  }
}

bool RegionMask::disjoint_with(const RegionMask& other) const {
  if (n_ != other.n_) throw ConfigError("region grids differ");
  for (std::size_t k = 0; k < bits_.size(); ++k)
    if (bits_[k] && other.bits_[k]) return false;
  return true;
}

RegionMask RegionMask::united(const RegionMask& other) const {
  if (n_ != other.n_) throw ConfigError("region grids differ");
  RegionMask m(n_);
  for (std::size_t k = 0; k < bits_.size(); ++k)
    m.bits_[k] = bits_[k] | other.bits_[k];
  m.rebuild_runs();
  return m;
}

// ---- masses ---------------------------------------------------------------

namespace {
void check_field_scale(const FieldSample& field, double t) {
  if (std::abs((field.scale_hi - field.scale_lo) - t) > 1e-9)
    throw ConfigError("mass normalization scale does not match the field's variance");
}
}  // namespace

LogMass gmc_mass(const FieldSample& field, double g, double t, const RegionMask& region) {
  if (g < 0) throw ConfigError("mass parameter must be >= 0");
  if (region.n() != field.grid.n) throw ConfigError("region grid mismatch");
  check_field_scale(field, t);
  if (region.empty()) return LogMass::minus_inf();

  const auto& k = simd::active();
  const double* x = field.values.data();
  double m = -HUGE_VAL;
  for (const auto& run : region.runs())
    m = std::max(m, k.reduce_max(x + run.offset, run.length));
  m *= g;
  double sum = 0.0;
  for (const auto& run : region.runs())
    sum += k.sum_exp_affine(x + run.offset, run.length, g, m);
  double h = field.grid.spacing();
  return {m + std::log(sum) - 0.5 * g * g * t + 2.0 * std::log(h), false};
}

LogMass gmc_mass_tilted(const FieldSample& field, std::span<const double> f, double g,
                        double t, const RegionMask& region) {
  if (g < 0) throw ConfigError("mass parameter must be >= 0");
  if (region.n() != field.grid.n) throw ConfigError("region grid mismatch");
  if (f.size() != field.grid.cells()) throw ConfigError("tilt size mismatch");
  check_field_scale(field, t);
  if (region.empty()) return LogMass::minus_inf();
  for (const auto& run : region.runs())
    for (std::size_t i = run.offset; i < run.offset + run.length; ++i)
      if (!std::isfinite(f[i])) throw ConfigError("tilt must be finite on the region");

  const auto& k = simd::active();
  const double* x = field.values.data();
  double m = -HUGE_VAL;
  for (const auto& run : region.runs())
    m = std::max(m, k.reduce_max_affine2(x + run.offset, f.data() + run.offset, run.length,
                                         g, g));
  double sum = 0.0;
  for (const auto& run : region.runs())
    sum += k.sum_exp_affine2(x + run.offset, f.data() + run.offset, run.length, g, g, m);
  double h = field.grid.spacing();
  return {m + std::log(sum) - 0.5 * g * g * t + 2.0 * std::log(h), false};
}

double ratio_from_masses(const LogMass& mass_lo, const LogMass& mass_hi,
                         const GmcParams& params) {
  if (mass_lo.empty || mass_hi.empty) throw ConfigError("ratio of an empty region");
  return std::exp(params.holder_exponent_num() * mass_lo.log_value -
                  params.holder_exponent_den() * mass_hi.log_value);
}

double balanced_ratio(const FieldSample& field, const GmcParams& params,
                      const RegionMask& region) {
  if (region.empty()) throw ConfigError("balanced ratio of an empty region");
  LogMass lo = gmc_mass(field, params.alpha, params.t, region);
  LogMass hi = gmc_mass(field, params.gamma, params.t, region);
  return ratio_from_masses(lo, hi, params);
}

double tilted_ratio(const FieldSample& field, std::span<const double> f,
                    const GmcParams& params, const RegionMask& region) {
  if (region.empty()) throw ConfigError("tilted ratio of an empty region");
  LogMass lo = gmc_mass_tilted(field, f, params.alpha, params.t, region);
  LogMass hi = gmc_mass_tilted(field, f, params.gamma, params.t, region);
  return ratio_from_masses(lo, hi, params);
}

// ---- subdivision ----------------------------------------------------------

std::vector<SubdivisionCell> subdivide(const RegionMask& region, int es) {
  if (es < 1) throw ConfigError("subdivision count must be >= 1");
  if (es != 1 && es % 2 != 0) throw ConfigError("subdivision count must be even");
  if (region.empty()) throw ConfigError("cannot subdivide an empty region");

  // the region must be one cell-aligned square
  int n = region.n();
  int imin = n, imax = -1, jmin = n, jmax = -1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (region.contains(i, j)) {
        imin = std::min(imin, i);
        imax = std::max(imax, i);
        jmin = std::min(jmin, j);
        jmax = std::max(jmax, j);
      }
  int side = imax - imin + 1;
  if (side != jmax - jmin + 1 ||
      region.cell_count() != static_cast<std::size_t>(side) * side)
    throw ConfigError("subdivision requires a full square region");
  if (side % es != 0)
    throw ConfigError("subdivision count must divide the region side in cells");

  int sub = side / es;
  double h = 1.0 / n;
  std::vector<SubdivisionCell> cells;
  cells.reserve(static_cast<std::size_t>(es) * es);
  for (int bx = 0; bx < es; ++bx) {
    for (int by = 0; by < es; ++by) {
      SubdivisionCell c;
      c.mask = RegionMask::square(n, imin + bx * sub, jmin + by * sub, sub);
      c.bx = bx;
      c.by = by;
      c.offset_x = (imin + bx * sub) * h;
      c.offset_y = (jmin + by * sub) * h;
      c.group = (bx & 1) + 2 * (by & 1);
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

// ---- cascade --------------------------------------------------------------

double CascadeResult::rhs_sum() const {
  double s = 0;
  for (double v : rhs_terms) s += v;
  return s;
}

CascadeResult cascade_decomposition(const FieldSample& field_s,
                                    const std::vector<FieldSample>& increments,
                                    const GmcParams& params, int es) {
  const int n = field_s.grid.n;
  if (es < 1 || (es != 1 && es % 2 != 0)) throw ConfigError("cascade: es must be even");
  if (n % es != 0) throw ConfigError("cascade: es must divide the grid side");
  if (field_s.scale_lo != 0.0) throw ConfigError("cascade: coarse field must start at scale 0");
  const double s = field_s.scale_hi;
  const double t = params.t;
  if (std::abs(std::exp(s) - es) > 1e-9 * es)
    throw ConfigError("cascade: coarse scale must equal ln(es)");
  if (!(t >= s)) throw ConfigError("cascade: requires t >= s");
  if (increments.size() != static_cast<std::size_t>(es) * es)
    throw ConfigError("cascade: expected es^2 increment fields");

  const int sub = n / es;
  for (const auto& inc : increments) {
    if (inc.grid.n != sub) throw ConfigError("cascade: increment grid must be n/es");
    if (std::abs((inc.scale_hi - inc.scale_lo) - (t - s)) > 1e-9)
      throw ConfigError("cascade: increment variance must be t - s");
  }

  // assemble the depth-t field from the coarse field plus per-cube increments
  FieldSample total = FieldSample::zeros(field_s.grid);
  total.scale_hi = t;
  for (int bx = 0; bx < es; ++bx) {
    for (int by = 0; by < es; ++by) {
      const FieldSample& inc = increments[static_cast<std::size_t>(bx) * es + by];
      for (int a = 0; a < sub; ++a)
        for (int b = 0; b < sub; ++b) {
          int i = bx * sub + a, j = by * sub + b;
          total.at(i, j) = field_s.at(i, j) + inc.at(a, b);
        }
    }
  }

  CascadeResult result;
  result.lhs = balanced_ratio(total, params, RegionMask::full(n));

  const double rescale = std::exp((0.5 * params.alpha * params.gamma - params.d) * s);
  GmcParams inc_params(params.alpha, params.gamma, t - s, params.d);
  std::vector<double> tilt(static_cast<std::size_t>(sub) * sub);
  for (int bx = 0; bx < es; ++bx) {
    for (int by = 0; by < es; ++by) {
      const FieldSample& inc = increments[static_cast<std::size_t>(bx) * es + by];
      for (int a = 0; a < sub; ++a)
        for (int b = 0; b < sub; ++b)
          tilt[static_cast<std::size_t>(a) * sub + b] = field_s.at(bx * sub + a, by * sub + b);
      double l = tilted_ratio(inc, tilt, inc_params, RegionMask::full(sub));
      result.rhs_terms.push_back(rescale * l);
      result.lhs_cubes.push_back(
          balanced_ratio(total, params, RegionMask::square(n, bx * sub, by * sub, sub)));
    }
  }
  return result;
}

}  // namespace gmclab
