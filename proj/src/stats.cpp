#include "gmclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gmclab/errors.hpp"

namespace gmclab {

namespace {

// regularized incomplete beta via Lentz's continued fraction
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta did not converge");
}

double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double beta_quantile(double a, double b, double target) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (betai(a, b, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double clopper_pearson_lo(std::size_t k, std::size_t n, double conf) {
  if (n == 0) throw ConfigError("empty sample");
  if (k == 0) return 0.0;
  double alpha = 1.0 - conf;
  return beta_quantile(static_cast<double>(k), static_cast<double>(n - k + 1), alpha / 2);
}

double clopper_pearson_hi(std::size_t k, std::size_t n, double conf) {
  if (n == 0) throw ConfigError("empty sample");
  if (k == n) return 1.0;
  double alpha = 1.0 - conf;
  return beta_quantile(static_cast<double>(k + 1), static_cast<double>(n - k),
                       1.0 - alpha / 2);
}

TailCurve tail_curve(std::span<const double> samples, std::span<const double> thresholds) {
  if (samples.size() < 2) throw ConfigError("tail curve needs samples");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw ConfigError("thresholds must be strictly ascending");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  TailCurve curve;
  curve.n_samples = sorted.size();
  const double n = static_cast<double>(sorted.size());
  for (double x : thresholds) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    std::size_t k = static_cast<std::size_t>(sorted.end() - it);
    TailPoint pt;
    pt.x = x;
    pt.exceed_count = k;
    pt.p_hat = static_cast<double>(k) / n;
    pt.ci_lo = clopper_pearson_lo(k, sorted.size());
    pt.ci_hi = clopper_pearson_hi(k, sorted.size());
    curve.points.push_back(pt);
  }
  return curve;
}

void weighted_least_squares(std::span<const double> x, std::span<const double> y,
                            std::span<const double> w, double* slope, double* intercept,
                            double* residual_norm) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  double det = sw * sxx - sx * sx;
  if (det <= 0) throw NumericError("degenerate regression");
  *slope = (sw * sxy - sx * sy) / det;
  *intercept = (sy - *slope * sx) / sw;
  if (residual_norm) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double r = y[i] - (*slope * x[i] + *intercept);
      rss += w[i] * r * r;
    }
    *residual_norm = std::sqrt(rss / sw);
  }
}

namespace {

struct WindowPoint {
  double lx, y, w;
  std::size_t index;
};

std::vector<WindowPoint> fit_window(const TailCurve& curve, const FitWindowRule& rule) {
  std::vector<WindowPoint> pts;
  const double p_floor = rule.p_min_factor / static_cast<double>(curve.n_samples);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const TailPoint& pt = curve.points[i];
    if (pt.x <= 0) continue;
    if (pt.p_hat < p_floor || pt.p_hat > rule.p_max) continue;
    if (pt.ci_lo <= 0 || pt.ci_hi >= 1) continue;
    double width = std::log(-std::log(pt.ci_lo)) - std::log(-std::log(pt.ci_hi));
    if (!(width > 0) || width >= rule.max_ci_width) continue;
    WindowPoint w;
    w.lx = std::log(pt.x);
    w.y = std::log(-std::log(pt.p_hat));
    w.w = 1.0 / (width * width);
    w.index = i;
    pts.push_back(w);
  }
  return pts;
}

}  // namespace

ExponentFit fit_stretched_exponential(const TailCurve& curve, const FitWindowRule& rule,
                                      int bootstrap, std::uint64_t bootstrap_seed) {
  std::vector<WindowPoint> pts = fit_window(curve, rule);
  if (pts.size() < 4)
    throw NumericError("degenerate fit window: " + std::to_string(pts.size()) +
                       " usable points (need >= 4)");
  std::vector<double> x, y, w;
  for (const auto& p : pts) {
    x.push_back(p.lx);
    y.push_back(p.y);
    w.push_back(p.w);
  }
  ExponentFit fit;
  fit.window_points = pts.size();
  weighted_least_squares(x, y, w, &fit.slope, &fit.intercept, &fit.residual_norm);

  // percentile bootstrap: multinomial resampling of the survival counts
  if (bootstrap > 1) {
    std::mt19937_64 eng(bootstrap_seed);
    const std::size_t n = curve.n_samples;
    const std::size_t m = curve.points.size();
    // bin counts between consecutive thresholds
    std::vector<std::size_t> bins(m + 1);
    bins[0] = n - curve.points.front().exceed_count;
    for (std::size_t i = 1; i < m; ++i)
      bins[i] = curve.points[i - 1].exceed_count - curve.points[i].exceed_count;
    bins[m] = curve.points.back().exceed_count;

    std::vector<double> slopes;
    slopes.reserve(static_cast<std::size_t>(bootstrap));
    std::vector<std::size_t> resampled(m + 1);
    for (int b = 0; b < bootstrap; ++b) {
      std::size_t remaining = n;
      double prob_left = 1.0;
      for (std::size_t i = 0; i <= m; ++i) {
        double p = prob_left > 0 ? static_cast<double>(bins[i]) / n / prob_left : 0.0;
        p = std::clamp(p, 0.0, 1.0);
        std::size_t draw =
            (i == m) ? remaining
                     : static_cast<std::size_t>(std::binomial_distribution<long>(
                           static_cast<long>(remaining), p)(eng));
        resampled[i] = draw;
        remaining -= draw;
        prob_left -= static_cast<double>(bins[i]) / n;
      }
      // suffix sums give resampled exceed counts; refit on the same window
      std::vector<double> yb, xb, wb;
      std::size_t suffix = 0;
      std::vector<std::size_t> exceed(m);
      for (std::size_t i = m; i-- > 0;) {
        suffix += resampled[i + 1];
        exceed[i] = suffix;
      }
      bool ok = true;
      for (const auto& p : pts) {
        double ph = static_cast<double>(exceed[p.index]) / static_cast<double>(n);
        if (ph <= 0 || ph >= 1) {
          ok = false;
          break;
        }
        xb.push_back(p.lx);
        yb.push_back(std::log(-std::log(ph)));
        wb.push_back(p.w);
      }
      if (!ok || xb.size() < 2) continue;
      double s, ic;
      weighted_least_squares(xb, yb, wb, &s, &ic, nullptr);
      slopes.push_back(s);
    }
    if (slopes.size() >= 100) {
      std::sort(slopes.begin(), slopes.end());
      fit.slope_ci_lo = slopes[static_cast<std::size_t>(0.025 * slopes.size())];
      fit.slope_ci_hi = slopes[static_cast<std::size_t>(0.975 * slopes.size())];
    } else {
      fit.slope_ci_lo = fit.slope_ci_hi = fit.slope;
    }
  } else {
    fit.slope_ci_lo = fit.slope_ci_hi = fit.slope;
  }
  return fit;
}

LogMeanExp log_mean_exp(std::span<const double> exponents) {
  if (exponents.empty()) throw ConfigError("empty sample");
  double m = -HUGE_VAL;
  for (double v : exponents) m = std::max(m, v);
  double s1 = 0, s2 = 0;
  for (double v : exponents) {
    double e = std::exp(v - m);
    s1 += e;
    s2 += e * e;
  }
  const double n = static_cast<double>(exponents.size());
  LogMeanExp r;
  r.log_mean = m + std::log(s1 / n);
  double mean_sh = s1 / n;
  double var_sh = std::max(0.0, (s2 / n - mean_sh * mean_sh) * n / std::max(1.0, n - 1));
  r.se = std::sqrt(var_sh / n) / mean_sh;
  r.dominated = 1.0 / s1 > 0.5;
  return r;
}

LaplaceCurve laplace_curve(std::span<const double> samples, std::span<const double> mu_grid) {
  if (samples.size() < 2) throw ConfigError("laplace curve needs samples");
  LaplaceCurve curve;
  std::vector<double> expo(samples.size());
  for (double mu : mu_grid) {
    if (mu < 0) throw ConfigError("laplace curve needs mu >= 0");
    for (std::size_t i = 0; i < samples.size(); ++i) expo[i] = mu * samples[i];
    LogMeanExp lme = log_mean_exp(expo);
    LaplacePoint pt;
    pt.mu = mu;
    pt.log_mgf = mu == 0.0 ? 0.0 : lme.log_mean;
    pt.se = mu == 0.0 ? 0.0 : lme.se;
    pt.dominated = mu == 0.0 ? false : lme.dominated;
    curve.points.push_back(pt);
  }
  return curve;
}

ExponentFit fit_laplace_growth(const LaplaceCurve& curve) {
  std::vector<double> x, y, w;
  for (const auto& pt : curve.points) {
    if (pt.dominated || pt.mu <= 0 || pt.log_mgf < std::log(2.0)) continue;
    x.push_back(std::log(pt.mu));
    y.push_back(std::log(pt.log_mgf));
    w.push_back(1.0);
  }
  if (x.size() < 2) throw NumericError("laplace growth fit: not enough valid points");
  ExponentFit fit;
  fit.window_points = x.size();
  weighted_least_squares(x, y, w, &fit.slope, &fit.intercept, &fit.residual_norm);
  fit.slope_ci_lo = fit.slope_ci_hi = fit.slope;
  return fit;
}

double laplace_tail_upper(double p) {
  if (!(p > 0) || !(p < 1)) throw ConfigError("laplace exponent p must lie in (0,1)");
  return 1.0 / p;
}

double laplace_tail_lower(double q, double p) {
  if (!(p > 0) || !(p < 1)) throw ConfigError("laplace exponent p must lie in (0,1)");
  if (!(q > 0) || !(q <= p)) throw ConfigError("lower exponent q must lie in (0, p]");
  return (1.0 - q) / (q * (1.0 - p));
}

MeanResult mean_with_se(std::span<const double> values) {
  MeanResult r;
  double s = 0;
  for (double v : values) {
    if (!std::isfinite(v)) {
      ++r.flagged;
      continue;
    }
    s += v;
    ++r.used;
  }
  if (r.used == 0) throw NumericError("all samples non-finite");
  r.mean = s / static_cast<double>(r.used);
  double s2 = 0;
  for (double v : values)
    if (std::isfinite(v)) s2 += (v - r.mean) * (v - r.mean);
  r.se = r.used > 1 ? std::sqrt(s2 / (static_cast<double>(r.used) - 1) /
                                static_cast<double>(r.used))
                    : 0.0;
  return r;
}

void bootstrap_mean_ci(std::span<const double> values, int resamples, std::uint64_t seed,
                       double* lo, double* hi) {
  std::mt19937_64 eng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double s = 0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(eng)];
    means.push_back(s / static_cast<double>(values.size()));
  }
  std::sort(means.begin(), means.end());
  *lo = means[static_cast<std::size_t>(0.025 * means.size())];
  *hi = means[static_cast<std::size_t>(0.975 * means.size())];
}

double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("ks test needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    double va = a[i], vb = b[j];
    if (va <= vb) ++i;
    if (vb <= va) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  double ne = std::sqrt(na * nb / (na + nb));
  double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // asymptotic Kolmogorov tail
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace gmclab
