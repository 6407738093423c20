// gmclab command-line runner: experiment configs, subcommands, reproducible
// outputs (CSV + JSON sidecar + manifest).
//
// Exit codes: 0 success, 1 assertion failure (--assert), 2 config error,
// 3 numerical precondition error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gmclab/config.hpp"
#include "gmclab/errors.hpp"
#include "gmclab/experiments.hpp"
#include "gmclab/field.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/io.hpp"
#include "gmclab/kahane.hpp"
#include "gmclab/kernel.hpp"
#include "gmclab/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gmclab;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<int> workers;
  std::optional<double> alpha, gamma, t;
  std::optional<int> n;
  bool assert_mode = false;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "config file (JSON)");
  cmd->add_option("--out-dir", flags->out_dir, "output directory");
  cmd->add_option("--seed", flags->seed, "master seed");
  cmd->add_option("--replicas", flags->replicas, "replica count");
  cmd->add_option("--workers", flags->workers, "worker threads");
  cmd->add_option("--alpha", flags->alpha, "first mass parameter");
  cmd->add_option("--gamma", flags->gamma, "second mass parameter");
  cmd->add_option("--t", flags->t, "regularization scale");
  cmd->add_option("--n", flags->n, "grid points per side");
  cmd->add_flag("--assert", flags->assert_mode, "turn acceptance checks into a gate");
}

ExperimentConfig load_config(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = ExperimentConfig::from_file(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.replicas) cfg.replicas = *flags.replicas;
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.alpha) cfg.gmc.alpha = *flags.alpha;
  if (flags.gamma) cfg.gmc.gamma = *flags.gamma;
  if (flags.t) cfg.field.t = *flags.t;
  if (flags.n) cfg.field.n = *flags.n;
  return cfg;
}

fs::path resolve_out_dir(const CommonFlags& flags, const std::string& subcommand) {
  fs::path dir;
  if (!flags.out_dir.empty()) {
    dir = flags.out_dir;
  } else if (const char* env = std::getenv("GMCLAB_OUT_DIR")) {
    dir = fs::path(env) / subcommand;
  } else {
    dir = fs::path("out") / subcommand;
  }
  fs::create_directories(dir);
  return dir;
}

json experiment_section(const ExperimentConfig& cfg, const char* key) {
  if (cfg.experiment.contains(key)) return cfg.experiment.at(key);
  return json::object();
}

template <class T>
T exp_opt(const json& section, const char* key, T fallback) {
  if (section.contains(key)) return section.at(key).get<T>();
  return fallback;
}

struct Gate {
  bool enabled = false;
  bool ok = true;
  void check(bool cond, const std::string& what) {
    if (cond) {
      std::cout << "[ok] " << what << "\n";
    } else {
      std::cout << "[violation] " << what << "\n";
      ok = false;
    }
  }
};

std::string fmt(double v) { return format_double(v); }

// ---- subcommands ----------------------------------------------------------

int run_validate(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  std::cout << cfg.validate();
  std::cout << "config valid\n";
  return 0;
}

int run_kernel_table(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  fs::path dir = resolve_out_dir(flags, "kernel-table");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  MollifierSpec spec = MollifierSpec::standard_bump();
  spec.table_resolution = cfg.kernel.table_resolution;
  RadialKernel rho = build_mollifier(spec);

  {
    CsvWriter csv(dir / "rho.csv", {"radius", "value"});
    for (int i = 0; i < rho.size(); ++i)
      csv.row({fmt(rho.node_radius(i)), fmt(rho.node_value(i))});
    csv.close();
    manifest.add_output(csv.path());
  }
  {
    CsvWriter k0(dir / "k0.csv", {"radius", "value"});
    CsvWriter g0(dir / "g0.csv", {"radius", "value"});
    const int rows = 512;
    for (int i = 1; i <= rows; ++i) {
      double r = 2.0 * i / rows;  // (0, 2], hits r = 1 exactly
      double g = eval_g0(rho, r);
      double k = r >= 1.0 ? 0.0 : -std::log(r) + g;
      k0.row({fmt(r), fmt(k)});
      g0.row({fmt(r), fmt(g)});
    }
    k0.close();
    g0.close();
    manifest.add_output(k0.path());
    manifest.add_output(g0.path());
  }
  {
    ScaleSchedule sched = ScaleSchedule::uniform(cfg.field.t, cfg.field.delta);
    for (std::size_t ell = 0; ell + 1 < sched.breakpoints.size(); ++ell) {
      LayerCovariance layer =
          layer_covariance(rho, sched.breakpoints[ell], sched.breakpoints[ell + 1]);
      CsvWriter csv(dir / ("layer_" + std::to_string(ell) + ".csv"), {"radius", "value"});
      const int rows = 256;
      for (int i = 0; i <= rows; ++i) {
        double r = layer.kernel.r_max() * i / rows;
        csv.row({fmt(r), fmt(layer(r))});
      }
      csv.close();
      manifest.add_output(csv.path());
    }
  }

  std::vector<double> t_grid = {1.0, 2.0, 4.0, 8.0};
  std::vector<double> r_grid;
  for (int i = 0; i < 64; ++i)
    r_grid.push_back(std::exp(std::log(1e-3) + i * (std::log(2.0) - std::log(1e-3)) / 63));
  double a_hat = estimate_bound_A(rho, t_grid, r_grid);
  json sidecar = {{"a_hat", a_hat},
                  {"table_resolution", cfg.kernel.table_resolution},
                  {"mollifier", cfg.kernel.mollifier}};
  {
    std::ofstream out(dir / "kernel_meta.json");
    out << sidecar.dump(2) << '\n';
  }
  manifest.add_output(dir / "kernel_meta.json");

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) {
    gate.check(eval_k0(rho, 1.0) == 0.0, "k0(1) == 0");
    double worst = 0;
    for (int i = 1; i <= 100; ++i) {
      double r = i / 101.0;
      worst = std::max(worst,
                       std::abs(eval_k0(rho, r) + std::log(r) - eval_g0(rho, r)));
    }
    gate.check(worst <= 1e-8, "k0 + ln r == g0 at 100 radii (worst " + fmt(worst) + ")");
  }
  manifest.set_note("a_hat", a_hat);
  manifest.write(dir);
  std::cout << "kernel tables written to " << dir.string() << " (A-hat = " << a_hat
            << ")\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_sample(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  fs::path dir = resolve_out_dir(flags, "sample");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  GridSpec grid(cfg.field.n, cfg.field.pad_factor);
  ScaleSchedule sched = ScaleSchedule::uniform(cfg.field.t, cfg.field.delta);
  const std::size_t replicas = cfg.replicas;

  fs::path snap_dir = dir / "snapshots";
  fs::create_directories(snap_dir);

  CsvWriter csv(dir / "summary.csv", {"replica", "min", "max", "mean", "variance"});
  const std::uint64_t tag = stream_tag("cli/sample");
  std::vector<FieldSample> fields(replicas);
  parallel_units((replicas + 1) / 2, cfg.workers, [&](std::size_t u, SampleWorkspace& ws) {
    auto [a, b] =
        ctx.sample_field_pair(cfg.field.t, sched, grid, unit_stream(cfg.seed, tag, u), ws);
    fields[2 * u] = std::move(a);
    if (2 * u + 1 < replicas) fields[2 * u + 1] = std::move(b);
  });

  bool all_finite = true;
  for (std::size_t r = 0; r < replicas; ++r) {
    const FieldSample& f = fields[r];
    double mn = HUGE_VAL, mx = -HUGE_VAL, mean = 0, m2 = 0;
    for (double v : f.values) {
      all_finite = all_finite && std::isfinite(v);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      mean += v;
    }
    mean /= static_cast<double>(f.values.size());
    for (double v : f.values) m2 += (v - mean) * (v - mean);
    m2 /= static_cast<double>(f.values.size() - 1);
    csv.row({std::to_string(r), fmt(mn), fmt(mx), fmt(mean), fmt(m2)});

    // snapshot: one JSON header line, then raw little-endian doubles
    char name[32];
    std::snprintf(name, sizeof(name), "field_%05zu.bin", r);
    fs::path snap = snap_dir / name;
    std::ofstream out(snap, std::ios::binary);
    json header = {{"n", f.grid.n},
                   {"spacing", f.grid.spacing()},
                   {"scale_lo", f.scale_lo},
                   {"scale_hi", f.scale_hi},
                   {"seed_path", f.seed_path}};
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    manifest.add_output(snap);
  }
  csv.close();
  manifest.add_output(csv.path());

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) gate.check(all_finite, "all field values finite");
  manifest.write(dir);
  std::cout << replicas << " snapshots written to " << snap_dir.string() << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_moments(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  json section = experiment_section(cfg, "moments");
  std::vector<int> orders = exp_opt<std::vector<int>>(section, "orders", {1, 2});
  std::vector<double> t_grid =
      exp_opt<std::vector<double>>(section, "t_grid", {1.0, 2.0, 3.0});
  fs::path dir = resolve_out_dir(flags, "moments");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  GridSpec grid(std::max(cfg.field.n, GridSpec::required_n(t_max)), cfg.field.pad_factor);

  MomentScanResult result = estimate_moments(env, cfg.gmc.alpha, cfg.gmc.gamma, orders,
                                             t_grid, grid, cfg.replicas);
  CsvWriter csv(dir / "moments.csv",
                {"t", "order", "estimate", "se", "replicas", "flagged"});
  for (const auto& est : result.estimates)
    csv.row({fmt(est.t), std::to_string(est.order), fmt(est.estimate), fmt(est.se),
             std::to_string(est.replicas), std::to_string(est.flagged)});
  csv.close();
  manifest.add_output(csv.path());

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) {
    std::size_t flagged = 0;
    for (const auto& est : result.estimates) flagged += est.flagged;
    gate.check(flagged == 0, "no non-finite samples");
    for (int n : orders) {
      if (n == 0) continue;
      std::vector<double> by_t;
      for (const auto& est : result.estimates)
        if (est.order == n && est.t > 0) by_t.push_back(est.estimate);
      bool stable = true;
      for (std::size_t i = 1; i < by_t.size(); ++i)
        stable = stable && by_t[i] < 2.0 * by_t[i - 1];
      gate.check(stable, "order-" + std::to_string(n) +
                             " moments non-exploding across the t grid");
    }
  }
  manifest.write(dir);
  std::cout << "moment estimates written to " << dir.string() << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_scaling(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  json section = experiment_section(cfg, "scaling");
  double p = exp_opt<double>(section, "p", 2.0);
  double q = exp_opt<double>(section, "q", 1.0);
  double t_offset = exp_opt<double>(section, "t_offset", 1.0);
  std::vector<double> s_grid =
      exp_opt<std::vector<double>>(section, "s_grid", {0.0, 0.5, 1.0, 1.5});
  fs::path dir = resolve_out_dir(flags, "scaling");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  double t_max = t_offset + *std::max_element(s_grid.begin(), s_grid.end());
  GridSpec grid(std::max(cfg.field.n, GridSpec::required_n(t_max)), cfg.field.pad_factor);

  ScalingResult result = scaling_regression(env, cfg.gmc.alpha, cfg.gmc.gamma, p, q, s_grid,
                                            t_offset, grid, cfg.replicas);
  CsvWriter csv(dir / "scaling.csv", {"s", "t", "log_moment", "se_log", "flagged"});
  for (const auto& pt : result.points)
    csv.row({fmt(pt.s), fmt(pt.t), fmt(pt.log_moment), fmt(pt.se_log),
             std::to_string(pt.flagged)});
  csv.close();
  manifest.add_output(csv.path());

  json sidecar = {{"slope", result.fit.slope},
                  {"slope_ci", {result.fit.slope_ci_lo, result.fit.slope_ci_hi}},
                  {"intercept", result.fit.intercept},
                  {"zeta_target", result.fit.target},
                  {"p", p},
                  {"q", q}};
  {
    std::ofstream out(dir / "fit.json");
    out << sidecar.dump(2) << '\n';
  }
  manifest.add_output(dir / "fit.json");

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) {
    double tol = std::max(0.1, 0.15 * std::abs(result.fit.target));
    gate.check(std::abs(result.fit.slope - result.fit.target) <= tol,
               "fitted slope " + fmt(result.fit.slope) + " within " + fmt(tol) +
                   " of zeta = " + fmt(result.fit.target));
  }
  manifest.write(dir);
  std::cout << "scaling fit: slope " << result.fit.slope << " (target "
            << result.fit.target << ")\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_tail(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  fs::path dir = resolve_out_dir(flags, "tail");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  GmcParams params(cfg.gmc.alpha, cfg.gmc.gamma, cfg.field.t);
  GridSpec grid(std::max(cfg.field.n, GridSpec::required_n(cfg.field.t)),
                cfg.field.pad_factor);

  TailExperimentResult result = tail_experiment(env, params, grid, cfg.replicas);
  CsvWriter csv(dir / "tail.csv", {"x", "p_hat", "ci_lo", "ci_hi", "exceed_count"});
  for (const auto& pt : result.curve.points)
    csv.row({fmt(pt.x), fmt(pt.p_hat), fmt(pt.ci_lo), fmt(pt.ci_hi),
             std::to_string(pt.exceed_count)});
  csv.close();
  manifest.add_output(csv.path());

  json sidecar = {{"beta_hat", result.fit.slope},
                  {"beta_ci", {result.fit.slope_ci_lo, result.fit.slope_ci_hi}},
                  {"target_exponent", result.fit.target},
                  {"window_points", result.fit.window_points},
                  {"q_max", result.q_max},
                  {"holder_bound", result.holder_bound},
                  {"n_samples", result.curve.n_samples}};
  {
    std::ofstream out(dir / "fit.json");
    out << sidecar.dump(2) << '\n';
  }
  manifest.add_output(dir / "fit.json");

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) {
    gate.check(result.fit.slope >= 0.5 * result.fit.target &&
                   result.fit.slope <= 2.0 * result.fit.target,
               "beta_hat " + fmt(result.fit.slope) + " within [0.5, 2] x target " +
                   fmt(result.fit.target));
  }
  manifest.write(dir);
  std::cout << "tail fit: beta " << result.fit.slope << ", target exponent "
            << result.fit.target << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_laplace(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  json section = experiment_section(cfg, "laplace");
  std::vector<double> t_grid =
      exp_opt<std::vector<double>>(section, "t_grid", {1.0, 2.0, 3.0});
  std::vector<double> mu_grid =
      exp_opt<std::vector<double>>(section, "mu_grid", {0.5, 1.0, 1.5});
  fs::path dir = resolve_out_dir(flags, "laplace");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  GridSpec grid(std::max(cfg.field.n, GridSpec::required_n(t_max)), cfg.field.pad_factor);

  LaplaceMonotonicityResult result = laplace_monotonicity(
      env, cfg.gmc.alpha, cfg.gmc.gamma, t_grid, mu_grid, grid, cfg.replicas);

  CsvWriter csv(dir / "laplace.csv", {"t", "mu", "log_mgf", "se", "dominated"});
  for (const auto& sc : result.scales)
    for (const auto& pt : sc.curve.points)
      csv.row({fmt(sc.t), fmt(pt.mu), fmt(pt.log_mgf), fmt(pt.se),
               pt.dominated ? "1" : "0"});
  csv.close();
  manifest.add_output(csv.path());

  CsvWriter steps(dir / "steps.csv", {"t_from", "t_to", "mu", "mean_diff", "se_diff", "ok"});
  for (const auto& st : result.steps)
    steps.row({fmt(st.t_from), fmt(st.t_to), fmt(st.mu), fmt(st.mean_diff), fmt(st.se_diff),
               st.ok ? "1" : "0"});
  steps.close();
  manifest.add_output(steps.path());

  double growth_target = 4.0 / (4.0 - cfg.gmc.alpha * cfg.gmc.gamma);
  json sidecar = {{"growth_target", growth_target}};
  try {
    ExponentFit growth = fit_laplace_growth(result.scales.back().curve);
    sidecar["growth_fit"] = growth.slope;
    sidecar["growth_points"] = growth.window_points;
  } catch (const NumericError& e) {
    sidecar["growth_fit_error"] = e.what();
  }
  {
    std::ofstream out(dir / "fit.json");
    out << sidecar.dump(2) << '\n';
  }
  manifest.add_output(dir / "fit.json");

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled)
    gate.check(result.passed(),
               "ln E[exp(mu Q)] non-decreasing in t at every mu (3 se, paired)");
  manifest.write(dir);
  std::cout << "laplace curves written; growth target " << growth_target << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_small_ball(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  json section = experiment_section(cfg, "small_ball");
  std::vector<double> t_grid =
      exp_opt<std::vector<double>>(section, "t_grid", {0.5, 1.0, 1.5, 2.0});
  fs::path dir = resolve_out_dir(flags, "small-ball");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  SmallBallResult result = small_ball_estimate(env, t_grid, cfg.replicas);

  CsvWriter csv(dir / "smallball.csv",
                {"t", "grid_n", "hits", "replicas", "p_hat", "ci_lo", "ci_hi", "censored"});
  for (const auto& pt : result.points)
    csv.row({fmt(pt.t), std::to_string(pt.grid_n), std::to_string(pt.hits),
             std::to_string(pt.replicas), fmt(pt.p_hat), fmt(pt.ci_lo), fmt(pt.ci_hi),
             pt.censored ? "1" : "0"});
  csv.close();
  manifest.add_output(csv.path());

  json sidecar = {{"fit_valid", result.fit_valid}, {"slope", result.slope}};
  {
    std::ofstream out(dir / "fit.json");
    out << sidecar.dump(2) << '\n';
  }
  manifest.add_output(dir / "fit.json");

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) {
    gate.check(result.fit_valid, "slope over uncensored points exists");
    if (result.fit_valid)
      gate.check(result.slope > 0.0 && result.slope <= 2.5,
                 "slope " + fmt(result.slope) + " in (0, 2.5]");
  }
  manifest.write(dir);
  std::cout << "small-ball estimates written to " << dir.string() << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_grad_moments(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  json section = experiment_section(cfg, "grad_moments");
  std::vector<double> s_grid = exp_opt<std::vector<double>>(section, "s_grid", {1.0, 2.0});
  std::vector<int> m_grid = exp_opt<std::vector<int>>(section, "m_grid", {1, 2, 4});
  fs::path dir = resolve_out_dir(flags, "grad-moments");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  GradMomentResult result = gradient_moment_scan(env, s_grid, m_grid, cfg.replicas);

  CsvWriter csv(dir / "gradmoments.csv", {"s", "m", "estimate", "se", "implied_c"});
  for (const auto& cell : result.cells)
    csv.row({fmt(cell.s), std::to_string(cell.m), fmt(cell.estimate), fmt(cell.se),
             fmt(cell.implied_c)});
  csv.close();
  manifest.add_output(csv.path());

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled)
    gate.check(result.implied_c_max / result.implied_c_min < 4.0,
               "implied-C spread " + fmt(result.implied_c_max / result.implied_c_min) +
                   " < 4");
  manifest.write(dir);
  std::cout << "gradient moment table written to " << dir.string() << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_cascade(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  json section = experiment_section(cfg, "cascade");
  int es = exp_opt<int>(section, "es", 2);
  fs::path dir = resolve_out_dir(flags, "cascade");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  FieldContext ctx{MollifierSpec::standard_bump()};
  ExperimentEnv env{&ctx, cfg.seed, cfg.workers};
  GmcParams params(cfg.gmc.alpha, cfg.gmc.gamma, cfg.field.t);
  GridSpec grid(cfg.field.n, cfg.field.pad_factor);
  CascadeExperimentResult result = cascade_experiment(env, params, es, grid, cfg.replicas);

  CsvWriter csv(dir / "cascade.csv", {"replica", "lhs", "rhs_sum", "margin", "cube_rel_err"});
  for (std::size_t r = 0; r < result.replicas.size(); ++r) {
    const auto& rep = result.replicas[r];
    csv.row({std::to_string(r), fmt(rep.lhs), fmt(rep.rhs_sum),
             fmt(rep.lhs / rep.rhs_sum - 1.0), fmt(rep.max_cube_rel_err)});
  }
  csv.close();
  manifest.add_output(csv.path());

  json sidecar = {{"violations", result.violations},
                  {"worst_margin", result.worst_margin},
                  {"worst_cube_rel_err", result.worst_cube_rel_err},
                  {"es", es}};
  {
    std::ofstream out(dir / "summary.json");
    out << sidecar.dump(2) << '\n';
  }
  manifest.add_output(dir / "summary.json");

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) {
    gate.check(result.violations == 0, "no pathwise subdivision violations");
    gate.check(result.worst_cube_rel_err <= 1e-9,
               "per-cube equality within 1e-9 (worst " +
                   fmt(result.worst_cube_rel_err) + ")");
  }
  manifest.write(dir);
  std::cout << "cascade: " << result.replicas.size() << " replicas, worst margin "
            << result.worst_margin << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

int run_kahane(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags);
  cfg.validate();
  fs::path dir = resolve_out_dir(flags, "kahane");
  RunManifest manifest(cfg.to_json(), cfg.seed);

  auto grid_cov = [](int k, double scale, double corr) {
    int n = k * k;
    Eigen::MatrixXd cov(n, n);
    for (int a = 0; a < n; ++a) {
      double ax = (a % k + 0.5) / k, ay = (a / k + 0.5) / k;
      for (int b = 0; b < n; ++b) {
        double bx = (b % k + 0.5) / k, by = (b / k + 0.5) / k;
        double d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
        cov(a, b) = scale * std::exp(-d2 / (corr * corr));
      }
    }
    return cov;
  };
  const int k = 4, sites = 16;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(sites, 1.0 / sites);
  const double alpha = cfg.gmc.alpha, gamma = cfg.gmc.gamma;
  auto func = ProductFunctionalSpec::ratio_functional(alpha, gamma, w, w);
  const std::size_t reps = cfg.replicas;

  json report;
  bool all_ok = true;

  // derivative formula vs finite differences, three path configurations
  struct PathCfg {
    double sx, cx, sy, cy;
  };
  std::vector<PathCfg> paths = {{1.0, 0.45, 1.35, 0.7},
                                {0.8, 0.35, 1.1, 0.5},
                                {1.2, 0.6, 1.2, 0.35}};
  for (std::size_t i = 0; i < paths.size(); ++i) {
    GaussianVectorSpec x, y;
    x.covariance = grid_cov(k, paths[i].sx, paths[i].cx);
    y.covariance = grid_cov(k, paths[i].sy, paths[i].cy);
    InterpolationPath path{x, y};
    RngStream rs{cfg.seed, stream_tag("kahane/deriv"), i};
    const double t = 0.5, eps = 0.05;
    McEstimate diff = interpolated_difference(path, func, t - eps, t + eps, reps, rs);
    double fd = diff.value / (2 * eps);
    double fd_se = diff.se / (2 * eps);
    McEstimate df = derivative_formula(path, func, t, reps, rs);
    double gap = std::abs(fd - df.value);
    double se = std::hypot(fd_se, df.se);
    bool ok = gap <= 3.0 * se;
    all_ok = all_ok && ok;
    report["derivative_vs_fd"].push_back({{"fd", fd},
                                          {"formula", df.value},
                                          {"gap", gap},
                                          {"se_combined", se},
                                          {"ok", ok}});
  }

  // variant bound under a flat covariance shift
  {
    GaussianVectorSpec x;
    x.covariance = grid_cov(k, 1.0, 0.5);
    GaussianVectorSpec y = x;
    y.covariance = x.covariance + 0.5 * Eigen::MatrixXd::Ones(sites, sites);
    VariantReport rep =
        check_kahane_variant(x, y, func, reps, RngStream{cfg.seed, stream_tag("kahane/variant"), 0});
    all_ok = all_ok && rep.passed();
    report["variant"] = {{"A", rep.bound_a},
                         {"C", rep.bound_c},
                         {"side_x", rep.side_x.value},
                         {"side_y", rep.side_y.value},
                         {"ok", rep.passed()}};
  }

  // convex order under PSD noise
  {
    GaussianVectorSpec x;
    x.covariance = grid_cov(k, 1.0, 0.5);
    GaussianVectorSpec y = x;
    y.covariance = x.covariance + 0.8 * Eigen::MatrixXd::Ones(sites, sites);
    ConvexOrderReport rep = check_convex_order(
        x, y, alpha, gamma, w, w, reps, RngStream{cfg.seed, stream_tag("kahane/convex"), 0});
    all_ok = all_ok && rep.passed();
    for (const auto& c : rep.cases)
      report["convex_order"].push_back({{"family", c.family},
                                        {"est_x", c.est_x},
                                        {"est_y", c.est_y},
                                        {"se_diff", c.se_diff},
                                        {"ok", c.ok}});
  }

  report["all_ok"] = all_ok;
  {
    std::ofstream out(dir / "kahane.json");
    out << report.dump(2) << '\n';
  }
  manifest.add_output(dir / "kahane.json");

  CsvWriter csv(dir / "kahane.csv", {"check", "ok"});
  csv.row({"derivative_vs_fd", report["derivative_vs_fd"].back()["ok"].get<bool>() ? "1" : "0"});
  csv.row({"variant", report["variant"]["ok"].get<bool>() ? "1" : "0"});
  csv.row({"convex_order", report["convex_order"].back()["ok"].get<bool>() ? "1" : "0"});
  csv.close();
  manifest.add_output(csv.path());

  Gate gate;
  gate.enabled = flags.assert_mode;
  if (gate.enabled) gate.check(all_ok, "all comparison checks pass");
  manifest.write(dir);
  std::cout << "comparison reports written to " << dir.string() << "\n";
  return gate.enabled && !gate.ok ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmclab: log-correlated Gaussian fields and multiplicative-chaos ratio statistics"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const CommonFlags&);
  };
  const Sub subs[] = {
      {"validate", "dry-run validation of a config", run_validate},
      {"kernel-table", "export mollifier / log-kernel / layer tables", run_kernel_table},
      {"sample", "dump field snapshots", run_sample},
      {"moments", "ratio moments over a scale grid", run_moments},
      {"scaling", "shrinking-set moment regression against zeta", run_scaling},
      {"tail", "right-tail curve and stretched-exponential fit", run_tail},
      {"laplace", "Laplace transform vs scale, monotonicity check", run_laplace},
      {"small-ball", "uniform-smallness probabilities vs scale", run_small_ball},
      {"grad-moments", "scaled gradient-sup moment table", run_grad_moments},
      {"cascade", "subdivision inequality, pathwise", run_cascade},
      {"kahane", "finite-dimensional comparison checks", run_kahane},
  };

  std::vector<CommonFlags> flag_store(std::size(subs));
  std::vector<std::pair<const Sub*, const CommonFlags*>> chosen;
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, &flag_store[i]);
    const Sub* sub = &subs[i];
    const CommonFlags* flags = &flag_store[i];
    cmd->callback([&chosen, sub, flags] { chosen.push_back({sub, flags}); });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    int rc = 0;
    for (auto& [sub, flags] : chosen) rc = std::max(rc, sub->fn(*flags));
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
