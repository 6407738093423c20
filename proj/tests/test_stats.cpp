#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/stats.hpp"

using namespace gmclab;

namespace {

// P(X > x) = exp(-x^beta)
std::vector<double> weibull_samples(double beta, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) {
    double uu = u(eng);
    while (uu <= 0.0) uu = u(eng);
    x = std::pow(-std::log(uu), 1.0 / beta);
  }
  return v;
}

std::vector<double> quantile_thresholds(std::vector<double> samples, int count) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  const double p_hi = 0.15, p_lo = 5.0 / n;
  std::vector<double> thresholds;
  for (int i = 0; i < count; ++i) {
    double f = static_cast<double>(i) / (count - 1);
    double p = std::exp(std::log(p_hi) + f * (std::log(p_lo) - std::log(p_hi)));
    std::size_t idx = std::min(static_cast<std::size_t>((1.0 - p) * n), samples.size() - 1);
    double x = samples[idx];
    if (thresholds.empty() || x > thresholds.back() * (1 + 1e-12)) thresholds.push_back(x);
  }
  return thresholds;
}

}  // namespace

TEST_CASE("clopper-pearson endpoints and containment") {
  CHECK(clopper_pearson_lo(0, 100) == 0.0);
  CHECK(clopper_pearson_hi(100, 100) == 1.0);
  double lo = clopper_pearson_lo(5, 100), hi = clopper_pearson_hi(5, 100);
  CHECK(lo < 0.05);
  CHECK(hi > 0.05);
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("clopper-pearson empirical coverage >= 93%") {
  std::mt19937_64 eng(31337);
  const double p = 0.015;
  const std::size_t n = 2000;
  int covered = 0;
  const int reps = 200;
  std::binomial_distribution<int> bin(static_cast<int>(n), p);
  for (int r = 0; r < reps; ++r) {
    std::size_t k = static_cast<std::size_t>(bin(eng));
    if (clopper_pearson_lo(k, n) <= p && p <= clopper_pearson_hi(k, n)) ++covered;
  }
  CHECK(covered >= 0.93 * reps);
}

TEST_CASE("tail curve: degenerate inputs") {
  std::vector<double> below = {0.1, 0.2, 0.3, 0.15};
  std::vector<double> thr = {1.0, 2.0};
  TailCurve c = tail_curve(below, thr);
  CHECK(c.points[0].p_hat == 0.0);
  CHECK(c.points[0].ci_lo == 0.0);
  CHECK(c.points[0].ci_hi > 0.0);

  std::vector<double> constant(50, 5.0);
  std::vector<double> thr2 = {4.0, 4.9, 5.0, 5.1};
  TailCurve c2 = tail_curve(constant, thr2);
  CHECK(c2.points[0].p_hat == 1.0);
  CHECK(c2.points[1].p_hat == 1.0);
  CHECK(c2.points[2].p_hat == 0.0);  // strictly greater than
  CHECK(c2.points[3].p_hat == 0.0);

  // survival is non-increasing along thresholds
  for (std::size_t i = 1; i < c2.points.size(); ++i)
    CHECK(c2.points[i].p_hat <= c2.points[i - 1].p_hat);

  CHECK_THROWS_AS(tail_curve(constant, std::vector<double>{2.0, 2.0}), ConfigError);
}

TEST_CASE("stretched-exponential fit recovers synthetic exponents within 5%") {
  for (double beta : {1.0, 2.0}) {
    CAPTURE(beta);
    auto samples = weibull_samples(beta, 1000000, 777 + static_cast<std::uint64_t>(beta));
    auto thresholds = quantile_thresholds(samples, 24);
    TailCurve curve = tail_curve(samples, thresholds);
    ExponentFit fit = fit_stretched_exponential(curve, {}, 400, 99);
    CHECK(fit.slope == doctest::Approx(beta).epsilon(0.05));
    CHECK(fit.slope_ci_lo <= fit.slope);
    CHECK(fit.slope_ci_hi >= fit.slope);
    CHECK(fit.window_points >= 4);
  }
}

TEST_CASE("stretched-exponential fit rejects a degenerate window") {
  std::vector<double> constant(20000, 1.0);
  std::vector<double> thr = {0.5, 0.8, 1.5, 2.0, 3.0};
  TailCurve curve = tail_curve(constant, thr);
  CHECK_THROWS_AS(fit_stretched_exponential(curve), NumericError);
}

TEST_CASE("laplace curve: exact points and convexity") {
  std::vector<double> degenerate(100, 3.25);
  std::vector<double> mu = {0.0, 0.5, 1.0, 2.0};
  LaplaceCurve c = laplace_curve(degenerate, mu);
  CHECK(c.points[0].log_mgf == 0.0);
  CHECK(c.points[0].se == 0.0);
  for (std::size_t i = 1; i < mu.size(); ++i)
    CHECK(c.points[i].log_mgf == doctest::Approx(mu[i] * 3.25).epsilon(1e-12));

  std::mt19937_64 eng(5);
  std::lognormal_distribution<double> ln(0.0, 0.5);
  std::vector<double> samples(20000);
  for (auto& v : samples) v = ln(eng);
  std::vector<double> mu2 = {0.0, 0.3, 0.6, 0.9, 1.2, 1.5};
  LaplaceCurve c2 = laplace_curve(samples, mu2);
  // slopes of ln E[e^{mu Q}] are non-decreasing (exact convexity of the
  // empirical log-MGF, up to float noise)
  for (std::size_t i = 2; i < mu2.size(); ++i) {
    double s_prev = (c2.points[i - 1].log_mgf - c2.points[i - 2].log_mgf) /
                    (mu2[i - 1] - mu2[i - 2]);
    double s_cur = (c2.points[i].log_mgf - c2.points[i - 1].log_mgf) / (mu2[i] - mu2[i - 1]);
    CHECK(s_cur >= s_prev - 1e-12);
  }
  // monotone non-decreasing in mu for nonnegative samples
  for (std::size_t i = 1; i < mu2.size(); ++i)
    CHECK(c2.points[i].log_mgf >= c2.points[i - 1].log_mgf - 1e-12);
}

TEST_CASE("laplace curve flags domination by the top sample") {
  std::vector<double> samples(1000, 0.1);
  samples[0] = 60.0;
  std::vector<double> mu = {1.0};
  LaplaceCurve c = laplace_curve(samples, mu);
  CHECK(c.points[0].dominated);
}

TEST_CASE("laplace-to-tail conversion arithmetic") {
  CHECK(laplace_tail_upper(0.5) == doctest::Approx(2.0).epsilon(1e-15));
  // matched bounds collapse to the upper route
  for (double p : {0.2, 0.5, 0.8})
    CHECK(laplace_tail_lower(p, p) == doctest::Approx(laplace_tail_upper(p)).epsilon(1e-12));
  // the exponent alpha*gamma/4 converts to the tail exponent 4/(alpha*gamma)
  double alpha = 1.0, gamma = 1.5;
  CHECK(laplace_tail_upper(alpha * gamma / 4.0) ==
        doctest::Approx(4.0 / (alpha * gamma)).epsilon(1e-12));
  CHECK_THROWS_AS(laplace_tail_upper(0.0), ConfigError);
  CHECK_THROWS_AS(laplace_tail_upper(1.0), ConfigError);
  CHECK_THROWS_AS(laplace_tail_lower(0.9, 0.5), ConfigError);
}

TEST_CASE("mean with flagging and bootstrap ci") {
  std::vector<double> v = {1.0, 2.0, 3.0, std::nan(""), 4.0};
  MeanResult r = mean_with_se(v);
  CHECK(r.flagged == 1);
  CHECK(r.used == 4);
  CHECK(r.mean == doctest::Approx(2.5));

  std::mt19937_64 eng(2);
  std::normal_distribution<double> nd(5.0, 1.0);
  std::vector<double> big(5000);
  for (auto& x : big) x = nd(eng);
  double lo, hi;
  bootstrap_mean_ci(big, 500, 7, &lo, &hi);
  MeanResult mr = mean_with_se(big);
  CHECK(lo < mr.mean);
  CHECK(hi > mr.mean);
  // width comparable to the normal-theory interval
  CHECK(hi - lo == doctest::Approx(3.92 * mr.se).epsilon(0.15));
}

TEST_CASE("weighted least squares recovers an exact line") {
  std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
  std::vector<double> y = {1.0, 0.5, 0.0, -0.5};
  std::vector<double> w = {1.0, 2.0, 1.0, 0.5};
  double slope, intercept, rn;
  weighted_least_squares(x, y, w, &slope, &intercept, &rn);
  CHECK(slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rn == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("two-sample ks behaves") {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> nd;
  std::vector<double> a(2000), b(2000), c(2000);
  for (auto& v : a) v = nd(eng);
  for (auto& v : b) v = nd(eng);
  for (auto& v : c) v = nd(eng) + 0.4;
  CHECK(ks_two_sample_pvalue(a, b) > 0.01);
  CHECK(ks_two_sample_pvalue(a, c) < 1e-6);
}
