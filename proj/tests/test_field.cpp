#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/field.hpp"
#include "gmclab/quadrature.hpp"
#include "gmclab/stats.hpp"
#include "test_support.hpp"

using namespace gmclab;
using gmclab::testing::test_context;
using gmclab::testing::test_rho;

namespace {

RngStream stream(std::uint64_t u, std::uint64_t sub = 0) {
  return RngStream{424242, u, sub};
}

struct PointStats {
  double mean = 0, se_mean = 0;
};

PointStats stats_of(const std::vector<double>& v) {
  PointStats s;
  double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  double s2 = 0;
  for (double x : v) s2 += (x - m) * (x - m);
  s.mean = m;
  s.se_mean = std::sqrt(s2 / (v.size() - 1.0) / v.size());
  return s;
}

}  // namespace

TEST_CASE("grid spec validation") {
  CHECK_THROWS_AS(GridSpec(48), ConfigError);
  CHECK_THROWS_AS(GridSpec(64, 1), ConfigError);
  GridSpec g(64);
  CHECK(g.spacing() == doctest::Approx(1.0 / 64));
  CHECK(g.padded() == 128);
  CHECK(g.resolves(2.0));
  CHECK_FALSE(g.resolves(3.5));
  CHECK(GridSpec::required_n(3.0) == 128);
}

TEST_CASE("schedules") {
  ScaleSchedule u = ScaleSchedule::uniform(1.0, 0.25);
  CHECK(u.breakpoints.size() == 5);
  CHECK(u.total() == 1.0);
  CHECK_THROWS_AS(ScaleSchedule::from_breakpoints({0.5, 1.0}), ConfigError);
  CHECK_THROWS_AS(ScaleSchedule::from_breakpoints({0.0, 1.0, 1.0}), ConfigError);
}

TEST_CASE("determinism: same stream gives bit-identical fields") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  const LayerCovariance& cov = ctx.layer(0.0, 1.0);
  FieldSample a1 = ctx.sample_layer(cov, grid, stream(5), ws);
  FieldSample a2 = ctx.sample_layer(cov, grid, stream(5), ws);
  CHECK(a1.values == a2.values);
  FieldSample b = ctx.sample_layer(cov, grid, stream(6), ws);
  CHECK(a1.values != b.values);
}

TEST_CASE("zero-length interval gives the zero field") {
  const FieldContext& ctx = test_context();
  GridSpec grid(16);
  SampleWorkspace ws;
  LayerCovariance degenerate;
  degenerate.s_lo = degenerate.s_hi = 1.0;
  FieldSample z = ctx.sample_layer(degenerate, grid, stream(1), ws);
  for (double v : z.values) CHECK(v == 0.0);

  FieldSample f0 = ctx.sample_field(0.0, ScaleSchedule::uniform(0.0), grid, stream(2), ws);
  for (double v : f0.values) CHECK(v == 0.0);
}

TEST_CASE("layer(0,1): pointwise variance and long-distance decorrelation") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  const LayerCovariance& cov = ctx.layer(0.0, 1.0);
  const int reps = 500;
  std::vector<double> sq, prod;
  for (int r = 0; r < reps; ++r) {
    auto [a, b] = ctx.sample_layer_pair(cov, grid, stream(100 + r), ws);
    sq.push_back(a.at(7, 9) * a.at(7, 9));
    sq.push_back(b.at(7, 9) * b.at(7, 9));
    // |x - y| >= 1 within the 32-grid: opposite corners are sqrt(2)*31/32 apart
    prod.push_back(a.at(0, 0) * a.at(31, 31));
    prod.push_back(b.at(0, 0) * b.at(31, 31));
  }
  PointStats v = stats_of(sq);
  CHECK(std::abs(v.mean - 1.0) < 5.0 * v.se_mean);
  PointStats c = stats_of(prod);
  CHECK(std::abs(c.mean) < 5.0 * c.se_mean);
}

TEST_CASE("pair sampling: real and imaginary replicas are independent") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  const LayerCovariance& cov = ctx.layer(0.0, 1.0);
  std::vector<double> prod;
  for (int r = 0; r < 800; ++r) {
    auto [a, b] = ctx.sample_layer_pair(cov, grid, stream(900 + r), ws);
    prod.push_back(a.at(5, 5) * b.at(5, 5));
  }
  PointStats c = stats_of(prod);
  CHECK(std::abs(c.mean) < 5.0 * c.se_mean);
}

TEST_CASE("field at t = 2: variance accumulates over layers") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  ScaleSchedule sched = ScaleSchedule::uniform(2.0, 0.25);
  std::vector<double> sq;
  for (int r = 0; r < 250; ++r) {
    auto [a, b] = ctx.sample_field_pair(2.0, sched, grid, stream(300 + r), ws);
    sq.push_back(a.at(11, 3) * a.at(11, 3));
    sq.push_back(b.at(11, 3) * b.at(11, 3));
  }
  PointStats v = stats_of(sq);
  CHECK(std::abs(v.mean - 2.0) < 5.0 * v.se_mean);
}

TEST_CASE("covariance at r = e^-1, t = 3 matches the layer quadrature and the log profile") {
  const FieldContext& ctx = test_context();
  GridSpec grid(128);
  SampleWorkspace ws;
  const double r_target = std::exp(-1.0);
  // pick two cells exactly r_target apart along one axis
  const int di = static_cast<int>(std::round(r_target * grid.n));
  const double r_actual = di * grid.spacing();
  std::vector<double> prod;
  ScaleSchedule sched = ScaleSchedule::from_breakpoints({0.0, 3.0});
  for (int r = 0; r < 250; ++r) {
    auto [a, b] = ctx.sample_field_pair(3.0, sched, grid, stream(7000 + r), ws);
    prod.push_back(a.at(10, 10) * a.at(10 + di, 10));
    prod.push_back(b.at(10, 10) * b.at(10 + di, 10));
  }
  PointStats c = stats_of(prod);
  double quad = scale_integral(test_rho(), 0.0, 3.0, r_actual);
  CHECK(std::abs(c.mean - quad) < 5.0 * c.se_mean);

  // and against min(t, ln 1/r) = 1 within the empirical bound A-hat
  std::vector<double> tg{1, 2, 3, 4, 8};
  std::vector<double> rg;
  for (int i = 0; i < 48; ++i)
    rg.push_back(std::exp(std::log(1e-3) + i * (std::log(2.0) - std::log(1e-3)) / 47));
  double a_hat = estimate_bound_A(test_rho(), tg, rg);
  CHECK(std::abs(c.mean - std::min(3.0, -std::log(r_actual))) < a_hat + 5.0 * c.se_mean);
}

TEST_CASE("increment by scaling: variance and independence at distance e^-s") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  const double s = 1.0, t = 2.0;
  const int di = static_cast<int>(std::round(std::exp(-s) * grid.n));
  std::vector<double> sq, prod;
  for (int r = 0; r < 400; ++r) {
    auto [a, b] = ctx.sample_increment_pair(s, t, grid, stream(1700 + r), ws);
    sq.push_back(a.at(3, 3) * a.at(3, 3));
    sq.push_back(b.at(3, 3) * b.at(3, 3));
    prod.push_back(a.at(3, 3) * a.at(3 + di, 3));
    prod.push_back(b.at(3, 3) * b.at(3 + di, 3));
  }
  PointStats v = stats_of(sq);
  CHECK(std::abs(v.mean - (t - s)) < 5.0 * v.se_mean);
  PointStats c = stats_of(prod);
  CHECK(std::abs(c.mean) < 5.0 * c.se_mean);
}

TEST_CASE("scaling law at the statistic level: grid-max distributions agree") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  const double s = std::log(2.0), t = s + 1.0;

  std::vector<double> max_inc, max_scaled;
  for (int r = 0; r < 400; ++r) {
    // direct increment: one layer of depth (s, t) at native spacing
    FieldSample direct = ctx.sample_layer(ctx.layer(s, t), grid, stream(2000 + r), ws);
    // rescaled route through the scaling law
    FieldSample scaled = ctx.sample_increment_by_scaling(s, t, grid, stream(60000 + r), ws);
    max_inc.push_back(*std::max_element(direct.values.begin(), direct.values.end()));
    max_scaled.push_back(*std::max_element(scaled.values.begin(), scaled.values.end()));
  }
  double p = ks_two_sample_pvalue(max_inc, max_scaled);
  CHECK(p > 0.01);
}

TEST_CASE("increment with s = 0 has the law of the field itself") {
  const FieldContext& ctx = test_context();
  GridSpec grid(16);
  SampleWorkspace ws;
  std::vector<double> a_vals, b_vals;
  for (int r = 0; r < 500; ++r) {
    FieldSample inc = ctx.sample_increment_by_scaling(0.0, 1.0, grid, stream(2600 + r), ws);
    FieldSample fld = ctx.sample_field(1.0, ScaleSchedule::from_breakpoints({0.0, 1.0}),
                                       grid, stream(90000 + r), ws);
    a_vals.push_back(inc.at(4, 7));
    b_vals.push_back(fld.at(4, 7));
  }
  CHECK(ks_two_sample_pvalue(a_vals, b_vals) > 0.01);
}

TEST_CASE("layer independence within one replica") {
  const FieldContext& ctx = test_context();
  GridSpec grid(16);
  SampleWorkspace ws;
  std::vector<double> prod;
  for (int r = 0; r < 600; ++r) {
    RngStream rs = stream(3100 + r);
    FieldSample l0 = ctx.sample_layer(ctx.layer(0.0, 0.5), grid, rs.sub(0), ws);
    FieldSample l1 = ctx.sample_layer(ctx.layer(0.5, 1.0), grid, rs.sub(1), ws);
    prod.push_back(l0.at(8, 8) * l1.at(8, 8));
  }
  PointStats c = stats_of(prod);
  CHECK(std::abs(c.mean) < 5.0 * c.se_mean);
}

TEST_CASE("stationarity: zero mean and displacement-only covariance") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  const LayerCovariance& cov = ctx.layer(0.0, 1.0);
  std::vector<double> at_a, at_b, prod_ab, prod_cd;
  for (int r = 0; r < 600; ++r) {
    auto [a, b] = ctx.sample_layer_pair(cov, grid, stream(4000 + r), ws);
    at_a.push_back(a.at(3, 29));
    at_b.push_back(b.at(20, 6));
    // same displacement (5, 2) at two different anchors
    prod_ab.push_back(a.at(2, 2) * a.at(7, 4));
    prod_cd.push_back(a.at(17, 23) * a.at(22, 25));
  }
  PointStats ma = stats_of(at_a), mb = stats_of(at_b);
  CHECK(std::abs(ma.mean) < 5.0 * ma.se_mean);
  CHECK(std::abs(mb.mean) < 5.0 * mb.se_mean);
  PointStats ca = stats_of(prod_ab), cb = stats_of(prod_cd);
  CHECK(std::abs(ca.mean - cb.mean) < 5.0 * std::hypot(ca.se_mean, cb.se_mean));
}

TEST_CASE("embedding stays PSD and clips almost nothing") {
  const FieldContext& ctx = test_context();
  GridSpec grid(64);
  const StationarySampler& s = ctx.layer_sampler(0.0, 2.0, grid, grid.spacing());
  CHECK(s.clipped_fraction() < 1e-6);
  const StationarySampler& z = ctx.smooth_z_sampler(grid);
  CHECK(z.clipped_fraction() == 0.0);
}

TEST_CASE("gradient of simple fields") {
  GridSpec grid(32);
  FieldSample c = FieldSample::zeros(grid);
  for (auto& v : c.values) v = 3.7;
  CHECK(gradient_sup(c) == 0.0);

  FieldSample ramp = FieldSample::zeros(grid);
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j) ramp.at(i, j) = (i + 0.5) * grid.spacing();
  CHECK(gradient_sup(ramp) == doctest::Approx(1.0).epsilon(1e-9));

  FieldSample sine = FieldSample::zeros(grid);
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j)
      sine.at(i, j) = std::sin(2 * std::numbers::pi * (i + 0.5) * grid.spacing());
  CHECK(gradient_sup(sine) ==
        doctest::Approx(2 * std::numbers::pi).epsilon(0.02));  // O(h^2) error
}

TEST_CASE("gradient moment is stable under grid refinement") {
  const FieldContext& ctx = test_context();
  SampleWorkspace ws;
  const double s = 1.0;
  auto second_moment = [&](int n, std::uint64_t base) {
    GridSpec grid(n);
    std::vector<double> vals;
    for (int r = 0; r < 4000; ++r) {
      auto [a, b] =
          ctx.sample_field_pair(s, ScaleSchedule::from_breakpoints({0.0, s}), grid,
                                stream(base + r), ws);
      double ga = std::exp(-s) * gradient_sup(a);
      double gb = std::exp(-s) * gradient_sup(b);
      vals.push_back(ga * ga);
      vals.push_back(gb * gb);
    }
    return stats_of(vals);
  };
  // gradient statistics run at 16 points per finest correlation length
  // (4x the field minimum); there the doubled-grid band holds
  PointStats coarse = second_moment(64, 5000);
  PointStats fine = second_moment(128, 5500);
  CHECK(std::abs(fine.mean - coarse.mean) / fine.mean < 0.10);
}

TEST_CASE("smooth perturbation field: variance equals amplitude * pi/2") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;

  FieldSample z0 = ctx.sample_smooth_z(grid, 0.0, stream(1), ws);
  for (double v : z0.values) CHECK(v == 0.0);

  // quadrature oracle for the radial integral of (1+xi^2)^{-3}
  double variance_oracle = adaptive_simpson(
      [](double xi) { return 2.0 * std::numbers::pi * xi * spectral_kernel_R(2, xi); }, 0.0,
      200.0, {1e-10, 48});
  CHECK(variance_oracle == doctest::Approx(std::numbers::pi / 2).epsilon(1e-6));

  const double amplitude = 1.8;
  std::vector<double> sq;
  std::vector<double> grads;
  for (int r = 0; r < 300; ++r) {
    auto [a, b] = ctx.sample_smooth_z_pair(grid, amplitude, stream(8000 + r), ws);
    sq.push_back(a.at(9, 21) * a.at(9, 21));
    sq.push_back(b.at(9, 21) * b.at(9, 21));
    grads.push_back(gradient_sup(a));
  }
  PointStats v = stats_of(sq);
  CHECK(std::abs(v.mean - amplitude * std::numbers::pi / 2) < 5.0 * v.se_mean);

  // gradient is finite for every sample, with a Gaussian-type upper tail:
  // ln P(sup > u) decreases linearly against u^2
  for (double g : grads) CHECK(std::isfinite(g));
  std::sort(grads.begin(), grads.end());
  auto survival = [&](double u) {
    auto it = std::upper_bound(grads.begin(), grads.end(), u);
    return static_cast<double>(grads.end() - it) / grads.size();
  };
  double u1 = grads[grads.size() / 2], u2 = grads[grads.size() * 9 / 10],
         u3 = grads[grads.size() * 985 / 1000];
  double y1 = std::log(survival(u1)), y2 = std::log(survival(u2)),
         y3 = std::log(survival(u3));
  double slope12 = (y2 - y1) / (u2 * u2 - u1 * u1);
  double slope23 = (y3 - y2) / (u3 * u3 - u2 * u2);
  CHECK(slope12 < 0.0);
  CHECK(slope23 < 0.0);
}

TEST_CASE("preconditions: resolution rule and torus size") {
  const FieldContext& ctx = test_context();
  SampleWorkspace ws;
  GridSpec coarse(16);
  CHECK_THROWS_AS(
      ctx.sample_field(3.0, ScaleSchedule::from_breakpoints({0.0, 3.0}), coarse,
                       stream(1), ws),
      ConfigError);
  CHECK_THROWS_AS(ctx.sample_increment_pair(1.0, 0.5, coarse, stream(1), ws), ConfigError);
}
