#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gmclab {

struct MomentEstimate {
  int order = 0;
  double t = 0;
  double estimate = 0;
  double se = 0;
  std::size_t replicas = 0;
  std::size_t flagged = 0;  // non-finite samples excluded (must be 0 to pass)
  std::string batch_scheme;
};

struct TailPoint {
  double x = 0;
  double p_hat = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  std::size_t exceed_count = 0;
};

struct TailCurve {
  std::vector<TailPoint> points;  // thresholds ascending
  std::size_t n_samples = 0;
};

struct ExponentFit {
  double slope = 0;
  double intercept = 0;
  double slope_ci_lo = 0;
  double slope_ci_hi = 0;
  double residual_norm = 0;
  std::size_t window_points = 0;
  double target = 0;  // reference exponent reported alongside
};

struct LaplacePoint {
  double mu = 0;
  double log_mgf = 0;
  double se = 0;           // delta-method se of log_mgf
  bool dominated = false;  // top sample carries > 50% of the empirical MGF
};

struct LaplaceCurve {
  std::vector<LaplacePoint> points;
};

/// Exact Clopper-Pearson binomial confidence bounds.
double clopper_pearson_lo(std::size_t k, std::size_t n, double conf = 0.95);
double clopper_pearson_hi(std::size_t k, std::size_t n, double conf = 0.95);

/// Empirical survival curve with Clopper-Pearson 95% intervals.
TailCurve tail_curve(std::span<const double> samples, std::span<const double> thresholds);

struct FitWindowRule {
  double p_min_factor = 10.0;  // keep P >= p_min_factor / n_samples
  double p_max = 0.1;
  double max_ci_width = 0.15;  // width of the CI mapped through ln(-ln p)
};

/// Weighted least squares of ln(-ln P) on ln x over the validated window,
/// with a percentile bootstrap CI on the slope (multinomial resampling of
/// the survival counts).
ExponentFit fit_stretched_exponential(const TailCurve& curve, const FitWindowRule& rule = {},
                                      int bootstrap = 1000, std::uint64_t bootstrap_seed = 1);

/// ln E[e^{mu Q}] over a mu grid, accumulated in the log domain.
LaplaceCurve laplace_curve(std::span<const double> samples, std::span<const double> mu_grid);

/// Fit of ln ln E[e^{mu Q}] on ln mu over non-dominated points with
/// ln E >= ln 2 (growth-exponent companion of the Laplace curve).
ExponentFit fit_laplace_growth(const LaplaceCurve& curve);

/// Tail exponent implied by Laplace growth mu^{1/(1-p)}: upper route 1/p.
double laplace_tail_upper(double p);
/// Lower route from a two-sided bound with exponents q < p: (1-q)/(q(1-p)).
double laplace_tail_lower(double q, double p);

/// Plain weighted least squares y ~ slope * x + intercept.
void weighted_least_squares(std::span<const double> x, std::span<const double> y,
                            std::span<const double> w, double* slope, double* intercept,
                            double* residual_norm);

/// Mean/standard-error pair over a sample vector, excluding non-finite
/// entries (their count is reported).
struct MeanResult {
  double mean = 0;
  double se = 0;
  std::size_t used = 0;
  std::size_t flagged = 0;
};
MeanResult mean_with_se(std::span<const double> values);

/// ln of the mean of e^{v} over samples given in the exponent domain,
/// with a delta-method standard error.
struct LogMeanExp {
  double log_mean = 0;
  double se = 0;
  bool dominated = false;
};
LogMeanExp log_mean_exp(std::span<const double> exponents);

/// Percentile bootstrap CI of the mean (used by moment estimates).
void bootstrap_mean_ci(std::span<const double> values, int resamples, std::uint64_t seed,
                       double* lo, double* hi);

/// Two-sample Kolmogorov-Smirnov test; returns the asymptotic p-value.
double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b);

}  // namespace gmclab
