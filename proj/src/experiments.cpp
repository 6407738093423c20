#include "gmclab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include "gmclab/errors.hpp"

namespace gmclab {

void parallel_units(std::size_t units, int workers,
                    const std::function<void(std::size_t, SampleWorkspace&)>& fn) {
  if (workers < 1) workers = 1;
  if (workers == 1 || units <= 1) {
    SampleWorkspace ws;
    for (std::size_t u = 0; u < units; ++u) fn(u, ws);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    SampleWorkspace ws;
    for (;;) {
      std::size_t u = next.fetch_add(1);
      if (u >= units) return;
      try {
        fn(u, ws);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

ScaleSchedule single_layer(double t) {
  return ScaleSchedule::from_breakpoints({0.0, t});
}

}  // namespace

std::vector<double> sample_ratio_values(const ExperimentEnv& env, const GmcParams& params,
                                        const GridSpec& grid, std::size_t replicas,
                                        std::string_view tag) {
  if (!env.ctx) throw ConfigError("experiment context not set");
  if (!grid.resolves(params.t))
    throw ConfigError("grid too coarse for the requested scale: need spacing <= e^-t/4");
  const std::uint64_t tag_hash = stream_tag(std::string("ratio/") + std::string(tag));
  const RegionMask region = RegionMask::full(grid.n);
  const ScaleSchedule sched = single_layer(params.t);
  std::vector<double> values(replicas);
  const std::size_t units = (replicas + 1) / 2;
  parallel_units(units, env.workers, [&](std::size_t u, SampleWorkspace& ws) {
    RngStream rs = unit_stream(env.master_seed, tag_hash, u);
    auto [a, b] = env.ctx->sample_field_pair(params.t, sched, grid, rs, ws);
    values[2 * u] = balanced_ratio(a, params, region);
    if (2 * u + 1 < replicas) values[2 * u + 1] = balanced_ratio(b, params, region);
  });
  return values;
}

MomentScanResult estimate_moments(const ExperimentEnv& env, double alpha, double gamma,
                                  std::span<const int> orders, std::span<const double> t_grid,
                                  const GridSpec& grid, std::size_t replicas) {
  if (replicas < 100) throw ConfigError("moment estimation needs >= 100 replicas");
  for (int n : orders)
    if (n < 0) throw ConfigError("moment orders must be >= 0");
  MomentScanResult result;
  std::vector<double> powers;
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    const double t = t_grid[ti];
    std::vector<double> values;
    if (t > 0) {
      GmcParams params(alpha, gamma, t);
      values = sample_ratio_values(env, params, grid, replicas,
                                   "moments/t" + std::to_string(ti));
    }
    for (int n : orders) {
      MomentEstimate est;
      est.order = n;
      est.t = t;
      est.replicas = replicas;
      est.batch_scheme = "iid replicas, percentile bootstrap (1000)";
      if (n == 0 || t == 0.0) {
        // Q == |S| = 1 at t = 0; and the zeroth moment is identically 1
        est.estimate = 1.0;
        est.se = 0.0;
      } else {
        powers.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
          powers[i] = std::pow(values[i], n);
        MeanResult mr = mean_with_se(powers);
        est.estimate = mr.mean;
        est.flagged = mr.flagged;
        double lo, hi;
        bootstrap_mean_ci(powers, 1000, env.master_seed ^ (0x9E37 + ti * 131 + n), &lo, &hi);
        est.se = std::max(mr.se, (hi - lo) / 3.92);
      }
      result.estimates.push_back(est);
    }
  }
  return result;
}

ScalingResult scaling_regression(const ExperimentEnv& env, double alpha, double gamma,
                                 double p, double q, std::span<const double> s_grid,
                                 double t_offset, const GridSpec& grid,
                                 std::size_t replicas_per_s) {
  if (s_grid.size() < 2) throw ConfigError("scaling regression needs >= 2 scales");
  if (t_offset <= 0) throw ConfigError("scaling regression needs t_offset > 0");
  GmcParams formula_params(alpha, gamma, t_offset);

  ScalingResult result;
  std::vector<double> xs, ys, ws;
  std::vector<std::vector<double>> all_values(s_grid.size());
  for (std::size_t si = 0; si < s_grid.size(); ++si) {
    const double s = s_grid[si];
    const double t = t_offset + s;
    if (!grid.resolves(t))
      throw ConfigError("grid too coarse for the deepest scale in the regression");
    GmcParams params(alpha, gamma, t);
    const double side = std::exp(-s);
    const RegionMask region = RegionMask::from_predicate(
        grid.n, [side](double cx, double cy) { return cx < side && cy < side; });
    if (region.empty()) throw ConfigError("shrunken region lost all cells; refine the grid");

    const std::uint64_t tag_hash = stream_tag("scaling/s" + std::to_string(si));
    const ScaleSchedule sched = single_layer(t);
    std::vector<double>& values = all_values[si];
    values.assign(replicas_per_s, 0.0);
    const std::size_t units = (replicas_per_s + 1) / 2;
    parallel_units(units, env.workers, [&](std::size_t u, SampleWorkspace& ws_) {
      RngStream rs = unit_stream(env.master_seed, tag_hash, u);
      auto [a, b] = env.ctx->sample_field_pair(t, sched, grid, rs, ws_);
      auto eval = [&](const FieldSample& f) {
        LogMass lo = gmc_mass(f, params.alpha, t, region);
        LogMass hi = gmc_mass(f, params.gamma, t, region);
        return std::exp(p * lo.log_value - q * hi.log_value);
      };
      values[2 * u] = eval(a);
      if (2 * u + 1 < replicas_per_s) values[2 * u + 1] = eval(b);
    });

    MeanResult mr = mean_with_se(values);
    ScalingPoint pt;
    pt.s = s;
    pt.t = t;
    pt.log_moment = std::log(mr.mean);
    pt.se_log = mr.se / mr.mean;
    pt.flagged = mr.flagged;
    result.points.push_back(pt);
    xs.push_back(s);
    ys.push_back(pt.log_moment);
    ws.push_back(pt.se_log > 0 ? 1.0 / (pt.se_log * pt.se_log) : 1.0);
  }

  weighted_least_squares(xs, ys, ws, &result.fit.slope, &result.fit.intercept,
                         &result.fit.residual_norm);
  result.fit.window_points = xs.size();
  result.fit.target = formula_params.zeta(p, q);

  // bootstrap the per-s means jointly
  std::mt19937_64 eng(env.master_seed ^ 0xb00ce);
  std::vector<double> slopes;
  for (int b = 0; b < 400; ++b) {
    std::vector<double> yb(s_grid.size());
    bool ok = true;
    for (std::size_t si = 0; si < s_grid.size(); ++si) {
      const auto& v = all_values[si];
      std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
      double sum = 0;
      for (std::size_t i = 0; i < v.size(); ++i) sum += v[pick(eng)];
      double mean = sum / static_cast<double>(v.size());
      if (!(mean > 0)) {
        ok = false;
        break;
      }
      yb[si] = std::log(mean);
    }
    if (!ok) continue;
    double sl, ic;
    weighted_least_squares(xs, yb, ws, &sl, &ic, nullptr);
    slopes.push_back(sl);
  }
  if (slopes.size() >= 100) {
    std::sort(slopes.begin(), slopes.end());
    result.fit.slope_ci_lo = slopes[static_cast<std::size_t>(0.025 * slopes.size())];
    result.fit.slope_ci_hi = slopes[static_cast<std::size_t>(0.975 * slopes.size())];
  } else {
    result.fit.slope_ci_lo = result.fit.slope_ci_hi = result.fit.slope;
  }
  return result;
}

TailExperimentResult tail_experiment(const ExperimentEnv& env, const GmcParams& params,
                                     const GridSpec& grid, std::size_t replicas,
                                     int n_thresholds) {
  if (replicas < 10000) throw ConfigError("tail experiment needs >= 1e4 replicas");
  std::vector<double> samples = sample_ratio_values(env, params, grid, replicas,
                                                    "tail/t" + std::to_string(params.t));
  TailExperimentResult result;
  result.holder_bound = std::exp(0.5 * params.alpha * params.gamma * params.t);
  result.q_max = *std::max_element(samples.begin(), samples.end());

  // thresholds at empirical quantiles, log-spaced in survival probability
  // from 0.15 down to 5/n
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double p_hi = 0.15;
  const double p_lo = 5.0 / n;
  std::vector<double> thresholds;
  for (int i = 0; i < n_thresholds; ++i) {
    double f = static_cast<double>(i) / (n_thresholds - 1);
    double p = std::exp(std::log(p_hi) + f * (std::log(p_lo) - std::log(p_hi)));
    std::size_t idx = static_cast<std::size_t>((1.0 - p) * n);
    idx = std::min(idx, sorted.size() - 1);
    double x = sorted[idx];
    if (thresholds.empty() || x > thresholds.back() * (1.0 + 1e-12)) thresholds.push_back(x);
  }
  result.curve = tail_curve(samples, thresholds);
  result.fit = fit_stretched_exponential(result.curve, {}, 1000, env.master_seed ^ 0x7a11);
  result.fit.target = 4.0 / (params.alpha * params.gamma);
  return result;
}

bool LaplaceMonotonicityResult::passed() const {
  if (steps.empty()) return false;
  for (const auto& s : steps)
    if (!s.ok) return false;
  return true;
}

LaplaceMonotonicityResult laplace_monotonicity(const ExperimentEnv& env, double alpha,
                                               double gamma, std::span<const double> t_grid,
                                               std::span<const double> mu_grid,
                                               const GridSpec& grid, std::size_t replicas) {
  if (t_grid.size() < 2) throw ConfigError("laplace monotonicity needs >= 2 scales");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    if (t_grid[i] <= 0 || (i > 0 && t_grid[i] <= t_grid[i - 1]))
      throw ConfigError("t grid must be positive and increasing");
  if (!grid.resolves(t_grid.back()))
    throw ConfigError("grid too coarse for the deepest scale");

  const std::size_t nt = t_grid.size();
  const RegionMask region = RegionMask::full(grid.n);
  // Q values per scale, common random numbers: increments are shared
  std::vector<std::vector<double>> q(nt, std::vector<double>(replicas));
  const std::uint64_t tag_hash = stream_tag("laplace/monotone");
  const std::size_t units = (replicas + 1) / 2;
  parallel_units(units, env.workers, [&](std::size_t u, SampleWorkspace& ws) {
    RngStream rs = unit_stream(env.master_seed, tag_hash, u);
    FieldSample acc_a = FieldSample::zeros(grid), acc_b = FieldSample::zeros(grid);
    double prev = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      const LayerCovariance& cov = env.ctx->layer(prev, t_grid[k]);
      auto [la, lb] = env.ctx->sample_layer_pair(cov, grid, rs.sub(k), ws);
      for (std::size_t i = 0; i < acc_a.values.size(); ++i) {
        acc_a.values[i] += la.values[i];
        acc_b.values[i] += lb.values[i];
      }
      acc_a.scale_hi = acc_b.scale_hi = t_grid[k];
      GmcParams params(alpha, gamma, t_grid[k]);
      q[k][2 * u] = balanced_ratio(acc_a, params, region);
      if (2 * u + 1 < replicas) q[k][2 * u + 1] = balanced_ratio(acc_b, params, region);
      prev = t_grid[k];
    }
  });

  LaplaceMonotonicityResult result;
  for (std::size_t k = 0; k < nt; ++k) {
    LaplaceScalePoint pt;
    pt.t = t_grid[k];
    pt.curve = laplace_curve(q[k], mu_grid);
    result.scales.push_back(std::move(pt));
  }
  std::vector<double> diffs(replicas);
  for (std::size_t k = 0; k + 1 < nt; ++k) {
    for (double mu : mu_grid) {
      for (std::size_t i = 0; i < replicas; ++i)
        diffs[i] = std::exp(mu * q[k + 1][i]) - std::exp(mu * q[k][i]);
      MeanResult mr = mean_with_se(diffs);
      LaplaceMonotonicityResult::PairedStep step;
      step.t_from = t_grid[k];
      step.t_to = t_grid[k + 1];
      step.mu = mu;
      step.mean_diff = mr.mean;
      step.se_diff = mr.se;
      step.ok = mr.mean >= -3.0 * mr.se;
      result.steps.push_back(step);
    }
  }
  return result;
}

SmallBallResult small_ball_estimate(const ExperimentEnv& env, std::span<const double> t_grid,
                                    std::size_t replicas) {
  if (t_grid.empty()) throw ConfigError("small-ball needs a t grid");
  SmallBallResult result;
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    const double t = t_grid[ti];
    if (t < 0) throw ConfigError("small-ball t must be >= 0");
    SmallBallPoint pt;
    pt.t = t;
    pt.replicas = replicas;
    if (t == 0.0) {  // zero field: always inside the ball
      pt.hits = replicas;
      pt.p_hat = 1.0;
      pt.ci_lo = pt.ci_hi = 1.0;
      pt.grid_n = 2;
      result.points.push_back(pt);
      continue;
    }
    GridSpec grid(std::max(16, GridSpec::required_n(t)));
    pt.grid_n = grid.n;
    const ScaleSchedule sched = single_layer(t);
    const std::uint64_t tag_hash = stream_tag("smallball/t" + std::to_string(ti));
    const std::size_t units = (replicas + 1) / 2;
    std::vector<unsigned char> inside(replicas, 0);
    parallel_units(units, env.workers, [&](std::size_t u, SampleWorkspace& ws) {
      RngStream rs = unit_stream(env.master_seed, tag_hash, u);
      auto [a, b] = env.ctx->sample_field_pair(t, sched, grid, rs, ws);
      auto sup_le_one = [](const FieldSample& f) {
        for (double v : f.values)
          if (std::abs(v) > 1.0) return false;
        return true;
      };
      inside[2 * u] = sup_le_one(a) ? 1 : 0;
      if (2 * u + 1 < replicas) inside[2 * u + 1] = sup_le_one(b) ? 1 : 0;
    });
    std::size_t hits = 0;
    for (unsigned char c : inside) hits += c;
    pt.hits = hits;
    pt.p_hat = static_cast<double>(hits) / static_cast<double>(replicas);
    pt.ci_lo = clopper_pearson_lo(hits, replicas);
    pt.ci_hi = clopper_pearson_hi(hits, replicas);
    pt.censored = hits < 10;
    result.points.push_back(pt);
  }

  std::vector<double> xs, ys, ws;
  for (const auto& pt : result.points) {
    if (pt.censored || pt.p_hat >= 1.0 || pt.t <= 0) continue;
    xs.push_back(pt.t);
    ys.push_back(std::log(-std::log(pt.p_hat)));
    ws.push_back(1.0);
  }
  if (xs.size() >= 2) {
    double ic, rn;
    weighted_least_squares(xs, ys, ws, &result.slope, &ic, &rn);
    result.fit_valid = true;
  }
  if (!result.fit_valid) {
    bool any_usable = false;
    for (const auto& pt : result.points) any_usable |= !pt.censored;
    if (!any_usable) throw NumericError("small-ball experiment fully censored");
  }
  return result;
}

GradMomentResult gradient_moment_scan(const ExperimentEnv& env, std::span<const double> s_grid,
                                      std::span<const int> m_grid, std::size_t replicas) {
  for (int m : m_grid)
    if (m < 1) throw ConfigError("gradient moments need m >= 1");
  GradMomentResult result;
  result.implied_c_max = -HUGE_VAL;
  result.implied_c_min = HUGE_VAL;
  for (std::size_t si = 0; si < s_grid.size(); ++si) {
    const double s = s_grid[si];
    std::vector<double> stat(replicas, 0.0);
    if (s > 0) {
      // gradient statistics need 16 points per finest correlation length;
      // at the field minimum (4 points) central differences are badly biased
      GridSpec grid(std::max(16, 4 * GridSpec::required_n(s)));
      const ScaleSchedule sched = single_layer(s);
      const std::uint64_t tag_hash = stream_tag("gradmoment/s" + std::to_string(si));
      const std::size_t units = (replicas + 1) / 2;
      const double damp = std::exp(-s);
      parallel_units(units, env.workers, [&](std::size_t u, SampleWorkspace& ws) {
        RngStream rs = unit_stream(env.master_seed, tag_hash, u);
        auto [a, b] = env.ctx->sample_field_pair(s, sched, grid, rs, ws);
        stat[2 * u] = damp * gradient_sup(a);
        if (2 * u + 1 < replicas) stat[2 * u + 1] = damp * gradient_sup(b);
      });
    }
    for (int m : m_grid) {
      std::vector<double> powers(replicas);
      for (std::size_t i = 0; i < replicas; ++i) powers[i] = std::pow(stat[i], m);
      MeanResult mr = mean_with_se(powers);
      GradMomentCell cell;
      cell.s = s;
      cell.m = m;
      cell.estimate = mr.mean;
      cell.se = mr.se;
      cell.implied_c =
          std::pow(mr.mean, 1.0 / m) / (std::exp(s) + std::sqrt(static_cast<double>(m)));
      result.cells.push_back(cell);
      if (s > 0) {
        result.implied_c_max = std::max(result.implied_c_max, cell.implied_c);
        result.implied_c_min = std::min(result.implied_c_min, cell.implied_c);
      }
    }
  }
  return result;
}

CascadeReplicaData cascade_replica_data(const ExperimentEnv& env, int es,
                                        const GridSpec& grid, double t, std::size_t unit) {
  if (es < 1 || (es != 1 && es % 2 != 0)) throw ConfigError("cascade: es must be even");
  if (grid.n % es != 0) throw ConfigError("cascade: es must divide n");
  const double s = std::log(static_cast<double>(es));
  SampleWorkspace ws;
  const std::uint64_t tag_hash = stream_tag("cascade");
  RngStream rs = unit_stream(env.master_seed, tag_hash, unit);
  CascadeReplicaData data;
  if (es == 1) {
    data.coarse = FieldSample::zeros(grid);
  } else {
    data.coarse = env.ctx->sample_layer(env.ctx->layer(0.0, s), grid, rs.sub(0), ws);
  }
  // the rescaled per-cube increment has the law of the depth-(t-s) field on S
  GridSpec sub_grid(grid.n / es, grid.pad_factor);
  for (int c = 0; c < es * es; ++c)
    data.increments.push_back(env.ctx->sample_increment_by_scaling(
        0.0, t - s, sub_grid, rs.sub(1 + static_cast<std::uint64_t>(c)), ws));
  return data;
}

CascadeExperimentResult cascade_experiment(const ExperimentEnv& env, const GmcParams& params,
                                           int es, const GridSpec& grid,
                                           std::size_t replicas, double rel_tol) {
  const double s = std::log(static_cast<double>(es));
  if (!(params.t >= s)) throw ConfigError("cascade: t >= ln(es) required");
  CascadeExperimentResult result;
  result.replicas.resize(replicas);
  // increments come in pairs; build both replicas of a unit from paired draws
  const std::uint64_t tag_hash = stream_tag("cascade");
  const std::size_t units = (replicas + 1) / 2;
  GridSpec sub_grid(grid.n / es, grid.pad_factor);
  parallel_units(units, env.workers, [&](std::size_t u, SampleWorkspace& ws) {
    RngStream rs = unit_stream(env.master_seed, tag_hash, u);
    std::pair<FieldSample, FieldSample> coarse;
    if (es == 1) {
      coarse = {FieldSample::zeros(grid), FieldSample::zeros(grid)};
    } else {
      coarse = env.ctx->sample_layer_pair(env.ctx->layer(0.0, s), grid, rs.sub(0), ws);
    }
    std::vector<FieldSample> inc_a, inc_b;
    for (int c = 0; c < es * es; ++c) {
      // law of (increment composed with the cube map) == depth-(t-s) field
      auto [ia, ib] = env.ctx->sample_increment_pair(
          0.0, params.t - s, sub_grid, rs.sub(1 + static_cast<std::uint64_t>(c)), ws);
      inc_a.push_back(std::move(ia));
      inc_b.push_back(std::move(ib));
    }
    auto evaluate = [&](const FieldSample& cf, const std::vector<FieldSample>& incs,
                        std::size_t slot) {
      CascadeResult cr = cascade_decomposition(cf, incs, params, es);
      CascadeReplica rep;
      rep.lhs = cr.lhs;
      rep.rhs_sum = cr.rhs_sum();
      double worst = 0;
      for (std::size_t c = 0; c < cr.rhs_terms.size(); ++c) {
        double denom = std::max(std::abs(cr.rhs_terms[c]), 1e-300);
        worst = std::max(worst, std::abs(cr.lhs_cubes[c] - cr.rhs_terms[c]) / denom);
      }
      rep.max_cube_rel_err = worst;
      result.replicas[slot] = rep;
    };
    evaluate(coarse.first, inc_a, 2 * u);
    if (2 * u + 1 < replicas) evaluate(coarse.second, inc_b, 2 * u + 1);
  });

  for (const auto& rep : result.replicas) {
    double margin = rep.lhs / rep.rhs_sum - 1.0;
    result.worst_margin = std::max(result.worst_margin, margin);
    if (margin > rel_tol) ++result.violations;
    result.worst_cube_rel_err = std::max(result.worst_cube_rel_err, rep.max_cube_rel_err);
  }
  return result;
}

}  // namespace gmclab
