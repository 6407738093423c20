#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "gmclab/field.hpp"
#include "gmclab/gmc.hpp"
#include "gmclab/stats.hpp"

namespace gmclab {

/// Shared context for the Monte Carlo drivers. Replica outputs are indexed
/// by replica and reduced single-threaded afterwards, so worker count never
/// changes any result.
struct ExperimentEnv {
  const FieldContext* ctx = nullptr;
  std::uint64_t master_seed = 12345;
  int workers = 1;
};

/// Deterministic parallel map: fn(unit, workspace) must write only to
/// per-unit slots. Each worker owns one workspace.
void parallel_units(std::size_t units, int workers,
                    const std::function<void(std::size_t, SampleWorkspace&)>& fn);

/// Ratio samples of the depth-t field over S. One spectral draw yields two
/// replicas; an odd count drops the trailing one.
std::vector<double> sample_ratio_values(const ExperimentEnv& env, const GmcParams& params,
                                        const GridSpec& grid, std::size_t replicas,
                                        std::string_view tag);

struct MomentScanResult {
  std::vector<MomentEstimate> estimates;  // one per (t, order)
};

MomentScanResult estimate_moments(const ExperimentEnv& env, double alpha, double gamma,
                                  std::span<const int> orders, std::span<const double> t_grid,
                                  const GridSpec& grid, std::size_t replicas);

struct ScalingPoint {
  double s = 0;
  double t = 0;
  double log_moment = 0;
  double se_log = 0;
  std::size_t flagged = 0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  ExponentFit fit;       // slope of ln E vs s; target = zeta(p, q)
};

/// Moment of mass_lo(e^-s B)^p / mass_hi(e^-s B)^q at t = t_offset + s,
/// regressed on s (the depth difference t - s stays fixed).
ScalingResult scaling_regression(const ExperimentEnv& env, double alpha, double gamma,
                                 double p, double q, std::span<const double> s_grid,
                                 double t_offset, const GridSpec& grid,
                                 std::size_t replicas_per_s);

struct TailExperimentResult {
  TailCurve curve;
  ExponentFit fit;        // target = 4/(alpha*gamma)
  double q_max = 0;       // largest sampled ratio
  double holder_bound = 0;  // e^{alpha gamma t / 2}
};

TailExperimentResult tail_experiment(const ExperimentEnv& env, const GmcParams& params,
                                     const GridSpec& grid, std::size_t replicas,
                                     int n_thresholds = 24);

struct LaplaceScalePoint {
  double t = 0;
  LaplaceCurve curve;  // over the mu grid
};

struct LaplaceMonotonicityResult {
  std::vector<LaplaceScalePoint> scales;
  // paired increment tests: mean of e^{mu Q_{t+1}} - e^{mu Q_t} with se,
  // indexed [t_step][mu]
  struct PairedStep {
    double t_from = 0, t_to = 0, mu = 0;
    double mean_diff = 0, se_diff = 0;
    bool ok = false;  // mean_diff >= -3 se
  };
  std::vector<PairedStep> steps;
  bool passed() const;
};

/// Laplace transform of the ratio across an increasing scale grid with
/// common random numbers (layered increments shared within a replica).
LaplaceMonotonicityResult laplace_monotonicity(const ExperimentEnv& env, double alpha,
                                               double gamma, std::span<const double> t_grid,
                                               std::span<const double> mu_grid,
                                               const GridSpec& grid, std::size_t replicas);

struct SmallBallPoint {
  double t = 0;
  std::size_t hits = 0;
  std::size_t replicas = 0;
  double p_hat = 0;
  double ci_lo = 0, ci_hi = 0;
  bool censored = false;  // fewer than 10 hits
  int grid_n = 0;
};

struct SmallBallResult {
  std::vector<SmallBallPoint> points;
  bool fit_valid = false;
  double slope = 0;  // of ln(-ln p) vs t over non-censored points
};

SmallBallResult small_ball_estimate(const ExperimentEnv& env, std::span<const double> t_grid,
                                    std::size_t replicas);

struct GradMomentCell {
  double s = 0;
  int m = 0;
  double estimate = 0;
  double se = 0;
  double implied_c = 0;  // estimate^{1/m} / (e^s + sqrt(m))
};

struct GradMomentResult {
  std::vector<GradMomentCell> cells;
  double implied_c_max = 0, implied_c_min = 0;
};

GradMomentResult gradient_moment_scan(const ExperimentEnv& env, std::span<const double> s_grid,
                                      std::span<const int> m_grid, std::size_t replicas);

struct CascadeReplica {
  double lhs = 0;
  double rhs_sum = 0;
  double max_cube_rel_err = 0;  // per-cube equality check
};

struct CascadeExperimentResult {
  std::vector<CascadeReplica> replicas;
  std::size_t violations = 0;        // lhs > rhs_sum beyond tolerance
  double worst_margin = 0;           // max of lhs/rhs_sum - 1
  double worst_cube_rel_err = 0;
};

CascadeExperimentResult cascade_experiment(const ExperimentEnv& env, const GmcParams& params,
                                           int es, const GridSpec& grid,
                                           std::size_t replicas, double rel_tol = 1e-9);

/// Builds one cascade replica's inputs (used by the direct-summation oracle).
struct CascadeReplicaData {
  FieldSample coarse;
  std::vector<FieldSample> increments;
};
CascadeReplicaData cascade_replica_data(const ExperimentEnv& env, int es,
                                        const GridSpec& grid, double t, std::size_t unit);

}  // namespace gmclab
