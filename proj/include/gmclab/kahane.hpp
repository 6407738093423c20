#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gmclab/rng.hpp"

namespace gmclab {

/// Finite-dimensional Gaussian vector: a covariance over <= 64 sites in S.
struct GaussianVectorSpec {
  Eigen::MatrixXd covariance;
  std::string label;

  void validate() const;  // symmetric, PSD to -1e-10
  int size() const { return static_cast<int>(covariance.rows()); }
};

/// Product of tilted-mass powers: prod_j ( sum_x e^{g_j Z(x) - g_j^2 Var/2} mu_j(x) )^{p_j}.
struct ProductFactor {
  double p = 1.0;
  double gamma = 1.0;
  Eigen::VectorXd mu;  // nonnegative weights over the sites
};

struct ProductFunctionalSpec {
  std::vector<ProductFactor> factors;

  /// The balanced-ratio functional: exponents (g/(g-a), -a/(g-a)) on the
  /// (a, g)-tilted masses of weights lambda and nu.
  static ProductFunctionalSpec ratio_functional(double alpha, double gamma,
                                                Eigen::VectorXd lambda, Eigen::VectorXd nu);

  void validate(int n_sites) const;
};

/// Interpolation Z(t) = sqrt(1-t) X + sqrt(t) Y between two independent
/// Gaussian vectors on the same sites.
struct InterpolationPath {
  GaussianVectorSpec x, y;

  void validate() const;
};

struct McEstimate {
  double value = 0;
  double se = 0;
  std::size_t replicas = 0;
};

/// Paired-MC estimate of E[Phi(t)]; a fixed RngStream gives common random
/// numbers across t values.
McEstimate interpolated_expectation(const InterpolationPath& path,
                                    const ProductFunctionalSpec& func, double t,
                                    std::size_t replicas, const RngStream& rng);

/// MC estimate of the interpolation derivative d/dt E[Phi(t)] via the
/// product-functional derivative identity (covariance-difference double sum
/// against the tilted probability weights).
McEstimate derivative_formula(const InterpolationPath& path,
                              const ProductFunctionalSpec& func, double t,
                              std::size_t replicas, const RngStream& rng);

/// Paired estimate of E[Phi(t2) - Phi(t1)] with per-replica coupling
/// (the finite-difference oracle for derivative_formula).
McEstimate interpolated_difference(const InterpolationPath& path,
                                   const ProductFunctionalSpec& func, double t1, double t2,
                                   std::size_t replicas, const RngStream& rng);

/// Bounded-difference comparison: |Cov_X - Cov_Y| <= A entrywise implies
/// E_X <= e^C E_Y and E_Y <= e^C E_X with C from the factor parameters.
struct VariantReport {
  double bound_a = 0;
  double bound_c = 0;
  McEstimate side_x, side_y;
  bool forward_ok = false;   // E_X <= e^C E_Y + 3 se
  bool backward_ok = false;  // E_Y <= e^C E_X + 3 se
  bool passed() const { return forward_ok && backward_ok; }
};

VariantReport check_kahane_variant(const GaussianVectorSpec& x, const GaussianVectorSpec& y,
                                   const ProductFunctionalSpec& func, std::size_t replicas,
                                   const RngStream& rng);

/// Convex-order check for the ratio functional under a PSD covariance
/// increase, using the coupling Y = X + independent remainder.
struct ConvexOrderCase {
  std::string family;  // "identity", "hinge", "exp"
  double est_x = 0, est_y = 0, se_diff = 0;
  bool ok = false;  // est_x <= est_y + 3 se_diff
};

struct ConvexOrderReport {
  std::vector<ConvexOrderCase> cases;
  bool passed() const;
};

ConvexOrderReport check_convex_order(const GaussianVectorSpec& x,
                                     const GaussianVectorSpec& y, double alpha,
                                     double gamma, const Eigen::VectorXd& lambda,
                                     const Eigen::VectorXd& nu, std::size_t replicas,
                                     const RngStream& rng);

/// PSD square root with negative eigenvalues (>= -1e-10) clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

}  // namespace gmclab
