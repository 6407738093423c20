#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmclab/fft.hpp"
#include "gmclab/kernel.hpp"
#include "gmclab/rng.hpp"

namespace gmclab {

/// Discretization of S = [0,1]^2: n x n cell centers at ((i+1/2)h, (j+1/2)h),
/// h = 1/n, embedded in a torus of side pad_factor for sampling.
struct GridSpec {
  int n = 64;
  int pad_factor = 2;

  GridSpec() = default;
  GridSpec(int n_, int pad = 2);

  double spacing() const { return 1.0 / n; }
  int padded() const { return n * pad_factor; }
  std::size_t cells() const { return static_cast<std::size_t>(n) * n; }

  /// Four grid points per finest correlation length e^{-t}.
  bool resolves(double t) const;
  static int required_n(double t);
};

/// Scale breakpoints 0 = t_0 < t_1 < ... < t_K = t for the layered field.
struct ScaleSchedule {
  std::vector<double> breakpoints;

  static ScaleSchedule uniform(double t, double delta = 0.25);
  static ScaleSchedule from_breakpoints(std::vector<double> pts);
  double total() const { return breakpoints.back(); }
};

/// One grid realization: the field at total scale t, a scale increment, or a
/// smooth perturbation, depending on (scale_lo, scale_hi).
struct FieldSample {
  GridSpec grid;
  std::vector<double> values;  // row-major, n*n
  double scale_lo = 0;
  double scale_hi = 0;
  std::string seed_path;

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * grid.n + j]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * grid.n + j]; }

  static FieldSample zeros(const GridSpec& g);
};

/// Per-worker scratch: FFT buffers and noise staging.
struct SampleWorkspace {
  ComplexBuf freq, spat;
  std::size_t cap = 0;
  std::vector<std::uint64_t> bits;
  std::vector<double> normals;

  void ensure(std::size_t m2);
};

/// Exact sampler for a stationary radial covariance on a regular grid via
/// circulant embedding: tabulate the covariance on the padded torus, FFT to
/// eigenvalues, clip the near-zero negative ones, and color spectral white
/// noise. One backward FFT yields two independent replicas (real and
/// imaginary parts).
class StationarySampler {
 public:
  StationarySampler(const RadialKernel& cov, const GridSpec& grid, double spacing);

  /// Builds eigenvalues from a spectral density instead of a covariance
  /// table (used for the smooth C^1 perturbation field).
  StationarySampler(const std::function<double(double)>& density, const GridSpec& grid,
                    double spacing);

  void sample_pair(NormalSource& src, SampleWorkspace& ws, std::span<double> a,
                   std::span<double> b) const;

  double min_eigenvalue() const { return min_eig_; }
  double clipped_fraction() const { return clipped_fraction_; }
  int padded() const { return m_; }

 private:
  void finalize_eigenvalues(std::vector<double>& eig, int pad_used);
  int n_;
  int m_;
  double min_eig_ = 0;
  double clipped_fraction_ = 0;
  std::vector<double> sqrt_eig_over_m_;
};

/// Owns the mollifier, layer covariances and embedding caches; exposes the
/// sampling operations. Immutable after construction; all methods are safe
/// for concurrent use (each worker passes its own workspace).
class FieldContext {
 public:
  explicit FieldContext(const MollifierSpec& spec = MollifierSpec::standard_bump());
  explicit FieldContext(RadialKernel rho);

  const RadialKernel& rho() const { return rho_; }

  const LayerCovariance& layer(double s_lo, double s_hi) const;
  const StationarySampler& layer_sampler(double s_lo, double s_hi, const GridSpec& grid,
                                         double spacing) const;
  const StationarySampler& smooth_z_sampler(const GridSpec& grid) const;

  std::pair<FieldSample, FieldSample> sample_layer_pair(const LayerCovariance& cov,
                                                        const GridSpec& grid,
                                                        const RngStream& rng,
                                                        SampleWorkspace& ws) const;
  FieldSample sample_layer(const LayerCovariance& cov, const GridSpec& grid,
                           const RngStream& rng, SampleWorkspace& ws) const;

  /// Sum of independent layer increments over the schedule.
  std::pair<FieldSample, FieldSample> sample_field_pair(double t, const ScaleSchedule& sched,
                                                        const GridSpec& grid,
                                                        const RngStream& rng,
                                                        SampleWorkspace& ws) const;
  FieldSample sample_field(double t, const ScaleSchedule& sched, const GridSpec& grid,
                           const RngStream& rng, SampleWorkspace& ws) const;

  /// A field with the law of the scale increment between s and t on S,
  /// realized by reading the depth-(t-s) field at spacing e^s h.
  std::pair<FieldSample, FieldSample> sample_increment_pair(double s, double t,
                                                            const GridSpec& grid,
                                                            const RngStream& rng,
                                                            SampleWorkspace& ws) const;
  FieldSample sample_increment_by_scaling(double s, double t, const GridSpec& grid,
                                          const RngStream& rng, SampleWorkspace& ws) const;

  std::pair<FieldSample, FieldSample> sample_smooth_z_pair(const GridSpec& grid,
                                                           double amplitude,
                                                           const RngStream& rng,
                                                           SampleWorkspace& ws) const;
  FieldSample sample_smooth_z(const GridSpec& grid, double amplitude, const RngStream& rng,
                              SampleWorkspace& ws) const;

 private:
  RadialKernel rho_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::uint64_t, std::uint64_t>,
                   std::unique_ptr<LayerCovariance>>
      layers_;
  mutable std::map<std::array<std::uint64_t, 4>, std::unique_ptr<StationarySampler>>
      samplers_;
  mutable std::map<std::array<std::uint64_t, 2>, std::unique_ptr<StationarySampler>>
      z_samplers_;
};

/// Max over grid cells of the finite-difference gradient magnitude
/// (central differences inside, one-sided at the boundary).
double gradient_sup(const FieldSample& field);

/// Same, for field + tilt (tilt given on the same grid).
double gradient_sup(const FieldSample& field, std::span<const double> tilt);

}  // namespace gmclab
