#pragma once

#include <span>
#include <vector>

#include "gmclab/field.hpp"

namespace gmclab {

/// Parameter pair for the two-exponent mass ratio, with the regularization
/// scale t. Stored canonically as (lo, hi) = (min, max); the ratio formula
/// is symmetric under the swap, so canonicalization is unobservable.
struct GmcParams {
  double alpha = 1.0;  // canonical lo
  double gamma = 1.5;  // canonical hi
  int d = 2;
  double t = 0.0;
  bool swapped = false;

  GmcParams() = default;
  GmcParams(double a, double g, double t_scale, int dim = 2);

  /// Growth rate in s of ln E[ mass_alpha(e^-s B)^p / mass_gamma(e^-s B)^q ].
  double zeta(double p, double q) const;

  /// zeta at the balanced exponents (n gamma/(gamma-alpha), n alpha/(gamma-alpha)).
  double zeta_balanced(int n) const;
  /// Closed form of the same: (alpha*gamma/2 - d) * n.
  double zeta_balanced_closed(int n) const;

  /// Minimizer offset of p -> zeta(p, n alpha/gamma): p* = n + d/alpha^2 + 1/2.
  double epsilon_shift() const;
  /// Minimum value zeta(n + epsilon_shift, n alpha/gamma) in closed form.
  double zeta_min(int n) const;

  double holder_exponent_num() const { return gamma / (gamma - alpha); }
  double holder_exponent_den() const { return alpha / (gamma - alpha); }
};

/// Cell-membership bitmap over the n x n grid. Disjointness and unions are
/// exact at cell granularity; contiguous row runs feed the SIMD kernels.
class RegionMask {
 public:
  struct Run {
    std::size_t offset;  // into the row-major value array
    std::size_t length;
  };

  RegionMask() = default;

  static RegionMask full(int n);
  static RegionMask square(int n, int i0, int j0, int side);
  template <class Pred>  // pred(cx, cy) on cell centers
  static RegionMask from_predicate(int n, Pred pred) {
    RegionMask m(n);
    double h = 1.0 / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (pred((i + 0.5) * h, (j + 0.5) * h)) m.set(i, j);
    m.rebuild_runs();
    return m;
  }

  int n() const { return n_; }
  double cell_area() const { return 1.0 / (static_cast<double>(n_) * n_); }
  std::size_t cell_count() const { return count_; }
  double area() const { return static_cast<double>(count_) * cell_area(); }
  bool empty() const { return count_ == 0; }

  bool contains(int i, int j) const { return bits_[static_cast<std::size_t>(i) * n_ + j]; }
  bool disjoint_with(const RegionMask& other) const;
  RegionMask united(const RegionMask& other) const;

  const std::vector<Run>& runs() const { return runs_; }

 private:
  explicit RegionMask(int n) : n_(n), bits_(static_cast<std::size_t>(n) * n, 0) {}
  void set(int i, int j) { bits_[static_cast<std::size_t>(i) * n_ + j] = 1; }
  void rebuild_runs();

  int n_ = 0;
  std::vector<unsigned char> bits_;
  std::vector<Run> runs_;
  std::size_t count_ = 0;
};

/// Natural log of a mass; empty regions carry a -inf sentinel.
struct LogMass {
  double log_value;
  bool empty;

  static LogMass minus_inf() { return {-1e308 * 10, true}; }
};

/// log of sum over region cells of exp(g*X - g^2 t / 2) * h^2.
/// The t in `params_t` must match the field's total scale.
LogMass gmc_mass(const FieldSample& field, double g, double t, const RegionMask& region);

/// Tilted mass: log of sum of exp(g*(f + X) - g^2 t / 2) * h^2.
LogMass gmc_mass_tilted(const FieldSample& field, std::span<const double> f, double g,
                        double t, const RegionMask& region);

double balanced_ratio(const FieldSample& field, const GmcParams& params,
                      const RegionMask& region);

/// Ratio from precomputed masses: exp(num_exp*log_a - den_exp*log_g).
double ratio_from_masses(const LogMass& mass_lo, const LogMass& mass_hi,
                         const GmcParams& params);

double tilted_ratio(const FieldSample& field, std::span<const double> f,
                    const GmcParams& params, const RegionMask& region);

/// One cell of an even subdivision: the sub-square, its affine placement
/// map x -> x/es + offset, and its parity group (2^d groups; same-group
/// squares are separated by at least one square side).
struct SubdivisionCell {
  RegionMask mask;
  int bx, by;          // block coordinates in [0, es)
  double offset_x, offset_y;
  int group;           // (bx & 1) + 2 * (by & 1)
};

/// Splits the region (must be a cell-aligned square with side divisible by
/// es) into es^2 sub-squares. es == 1 is the degenerate identity split.
std::vector<SubdivisionCell> subdivide(const RegionMask& region, int es);

struct CascadeResult {
  double lhs;                      // ratio of the assembled depth-t field over S
  std::vector<double> rhs_terms;   // per-cube rescaled tilted ratios
  std::vector<double> lhs_cubes;   // per-cube ratios of the assembled field
  double rhs_sum() const;
};

/// Assembles the depth-t field from the coarse field and per-cube
/// increments, then evaluates both sides of the subdivision bound:
/// lhs <= sum of rhs pathwise, with per-cube equality
/// lhs_cubes[i] == e^{(alpha*gamma/2 - d) s} * L^(i).
CascadeResult cascade_decomposition(const FieldSample& field_s,
                                    const std::vector<FieldSample>& increments,
                                    const GmcParams& params, int es);

}  // namespace gmclab
