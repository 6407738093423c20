#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/gmc.hpp"
#include "test_support.hpp"

using namespace gmclab;
using gmclab::testing::test_context;

namespace {

FieldSample synthetic_field(int n, double t, std::uint64_t seed, double lo = -3.0,
                            double hi = 3.0) {
  FieldSample f = FieldSample::zeros(GridSpec(n));
  f.scale_hi = t;
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : f.values) v = dist(eng);
  return f;
}

std::vector<double> random_smooth_tilt(int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> amp(-1.5, 1.5);
  double a1 = amp(eng), a2 = amp(eng), b1 = amp(eng), b2 = amp(eng);
  std::vector<double> f(static_cast<std::size_t>(n) * n);
  double h = 1.0 / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = (i + 0.5) * h, y = (j + 0.5) * h;
      f[static_cast<std::size_t>(i) * n + j] = a1 * std::cos(2 * M_PI * x) +
                                               b1 * std::sin(2 * M_PI * y) +
                                               a2 * std::cos(4 * M_PI * (x + y)) + b2;
    }
  return f;
}

// plain direct summation, no log-domain tricks: the independent oracle
double direct_mass(const FieldSample& f, double g, double t, int i0, int j0, int side) {
  double h2 = f.grid.spacing() * f.grid.spacing();
  double sum = 0;
  for (int i = i0; i < i0 + side; ++i)
    for (int j = j0; j < j0 + side; ++j)
      sum += std::exp(g * f.at(i, j) - 0.5 * g * g * t) * h2;
  return sum;
}

double direct_ratio(const FieldSample& f, const GmcParams& p, int i0, int j0, int side) {
  double ma = direct_mass(f, p.alpha, p.t, i0, j0, side);
  double mg = direct_mass(f, p.gamma, p.t, i0, j0, side);
  return std::pow(ma, p.gamma / (p.gamma - p.alpha)) /
         std::pow(mg, p.alpha / (p.gamma - p.alpha));
}

}  // namespace

TEST_CASE("zeta: forced identities") {
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> par(0.05, 1.95);
  std::uniform_int_distribution<int> ord(1, 6);
  for (int i = 0; i < 20; ++i) {
    double a = par(eng), g = par(eng);
    if (a == g) continue;
    GmcParams p(a, g, 1.0);
    CAPTURE(a);
    CAPTURE(g);
    // mean of the mass is Lebesgue: zeta(1, 0) = -d
    CHECK(p.zeta(1.0, 0.0) == doctest::Approx(-2.0).epsilon(1e-12));
    int n = ord(eng);
    CHECK(p.zeta_balanced(n) ==
          doctest::Approx(p.zeta_balanced_closed(n)).epsilon(1e-12).scale(1.0));
    CHECK(p.zeta(n + p.epsilon_shift(), n * p.alpha / p.gamma) ==
          doctest::Approx(p.zeta_min(n)).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("zeta: reference values") {
  GmcParams p(1.0, 1.5, 2.0);
  CHECK(p.zeta_balanced(1) == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(p.zeta(3.0, 2.0) == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(p.epsilon_shift() == doctest::Approx(2.5).epsilon(1e-12));
  // (gamma-alpha)(alpha/2 - d/gamma)n - (alpha/2 + d/alpha)^2/2
  CHECK(p.zeta_min(1) == doctest::Approx(0.5 * (0.5 - 4.0 / 3.0) - 3.125).epsilon(1e-12));
  GmcParams q(0.5, 1.0, 1.0);
  CHECK(q.zeta(2.0, 1.0) == doctest::Approx(-1.75).epsilon(1e-12));
}

TEST_CASE("params validation and canonicalization") {
  CHECK_THROWS_AS(GmcParams(2.5, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(GmcParams(1.0, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(GmcParams(-0.5, 1.0, 1.0), ConfigError);
  GmcParams p(1.5, 1.0, 2.0);
  CHECK(p.alpha == 1.0);
  CHECK(p.gamma == 1.5);
  CHECK(p.swapped);
}

TEST_CASE("mass: zero field, zero parameter, empty region") {
  GridSpec grid(16);
  FieldSample zero = FieldSample::zeros(grid);
  RegionMask full = RegionMask::full(grid.n);
  CHECK(gmc_mass(zero, 1.0, 0.0, full).log_value == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  FieldSample wild = synthetic_field(16, 0.0, 3);
  CHECK(gmc_mass(wild, 0.0, 0.0, full).log_value ==
        doctest::Approx(std::log(full.area())).epsilon(1e-12));

  RegionMask none = RegionMask::from_predicate(grid.n, [](double, double) { return false; });
  CHECK(gmc_mass(wild, 1.0, 0.0, none).empty);
  GmcParams p(1.0, 1.5, 0.0);
  CHECK_THROWS_AS(balanced_ratio(wild, p, none), ConfigError);
}

TEST_CASE("mass agrees with direct summation") {
  FieldSample f = synthetic_field(32, 2.0, 11);
  RegionMask region = RegionMask::square(32, 4, 8, 16);
  LogMass lm = gmc_mass(f, 1.3, 2.0, region);
  double direct = direct_mass(f, 1.3, 2.0, 4, 8, 16);
  CHECK(lm.log_value == doctest::Approx(std::log(direct)).epsilon(1e-12).scale(1.0));
}

TEST_CASE("mean normalization: ensemble mean of the mass is the area") {
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  RegionMask full = RegionMask::full(grid.n);
  const int reps = 1000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < reps; ++r) {
    auto [a, b] = ctx.sample_field_pair(2.0, ScaleSchedule::from_breakpoints({0.0, 2.0}),
                                        grid, RngStream{777, static_cast<std::uint64_t>(r), 0},
                                        ws);
    for (const FieldSample* f : {&a, &b}) {
      double v = std::exp(gmc_mass(*f, 1.0, 2.0, full).log_value);
      sum += v;
      sum2 += v * v;
    }
  }
  double n = 2.0 * reps;
  double mean = sum / n;
  double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
  CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("balanced ratio: t = 0 and constant fields give the area") {
  GridSpec grid(16);
  RegionMask full = RegionMask::full(grid.n);
  GmcParams p(1.0, 1.5, 0.0);

  FieldSample zero = FieldSample::zeros(grid);
  CHECK(balanced_ratio(zero, p, full) == doctest::Approx(1.0).epsilon(1e-12));

  FieldSample c = FieldSample::zeros(grid);
  for (auto& v : c.values) v = -2.9;
  CHECK(balanced_ratio(c, p, full) == doctest::Approx(1.0).epsilon(1e-12));

  RegionMask part = RegionMask::square(grid.n, 2, 3, 7);
  CHECK(balanced_ratio(c, p, part) == doctest::Approx(part.area()).epsilon(1e-12));
}

TEST_CASE("balanced ratio: single cell attains the Holder bound exactly") {
  GridSpec grid(16);
  FieldSample f = synthetic_field(16, 2.0, 5);
  GmcParams p(1.0, 1.5, 2.0);
  RegionMask cell = RegionMask::square(grid.n, 9, 4, 1);
  double expected = cell.cell_area() * std::exp(0.5 * p.alpha * p.gamma * p.t);
  CHECK(balanced_ratio(f, p, cell) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pathwise Holder bound on synthetic and sampled fields") {
  GmcParams p(1.0, 1.5, 2.0);
  const double bound = std::exp(0.5 * p.alpha * p.gamma * p.t);
  for (int i = 0; i < 200; ++i) {
    FieldSample f = synthetic_field(16, 2.0, 100 + i, -6.0, 6.0);
    RegionMask full = RegionMask::full(16);
    CHECK(balanced_ratio(f, p, full) <= bound * (1.0 + 1e-9));
  }
  const FieldContext& ctx = test_context();
  GridSpec grid(32);
  SampleWorkspace ws;
  RegionMask full = RegionMask::full(grid.n);
  for (int r = 0; r < 100; ++r) {
    auto [a, b] = ctx.sample_field_pair(2.0, ScaleSchedule::from_breakpoints({0.0, 2.0}),
                                        grid, RngStream{888, static_cast<std::uint64_t>(r), 0},
                                        ws);
    CHECK(balanced_ratio(a, p, full) <= bound * (1.0 + 1e-9));
    CHECK(balanced_ratio(b, p, full) <= bound * (1.0 + 1e-9));
  }
}

TEST_CASE("ratio lower bound on uniformly bounded fields") {
  // on {sup |X_t| <= 1} the ratio is at least e^{-2 a g/(g-a)} e^{a g t/2}
  GmcParams p(1.0, 1.5, 2.0);
  const double delta = std::exp(-2.0 * p.alpha * p.gamma / (p.gamma - p.alpha));
  const double floor = delta * std::exp(0.5 * p.alpha * p.gamma * p.t);
  for (int i = 0; i < 50; ++i) {
    FieldSample f = synthetic_field(16, 2.0, 500 + i, -1.0, 1.0);
    CHECK(balanced_ratio(f, p, RegionMask::full(16)) >= floor * (1.0 - 1e-9));
  }
}

TEST_CASE("subadditivity over disjoint regions, pathwise") {
  GmcParams p(0.8, 1.2, 1.5);
  std::mt19937_64 eng(23);
  for (int i = 0; i < 50; ++i) {
    FieldSample f = synthetic_field(16, 1.5, 700 + i);
    std::uniform_int_distribution<int> pos(0, 7);
    RegionMask b1 = RegionMask::square(16, pos(eng), pos(eng), 4);
    RegionMask b2 = RegionMask::square(16, 8 + pos(eng) % 4, 8 + pos(eng) % 4, 4);
    REQUIRE(b1.disjoint_with(b2));
    double q_union = balanced_ratio(f, p, b1.united(b2));
    double q_sum = balanced_ratio(f, p, b1) + balanced_ratio(f, p, b2);
    CHECK(q_union <= q_sum * (1.0 + 1e-12));
  }
}

TEST_CASE("swap symmetry is unobservable") {
  FieldSample f = synthetic_field(16, 1.0, 9);
  RegionMask full = RegionMask::full(16);
  double q1 = balanced_ratio(f, GmcParams(0.7, 1.4, 1.0), full);
  double q2 = balanced_ratio(f, GmcParams(1.4, 0.7, 1.0), full);
  CHECK(q1 == q2);  // bitwise: canonicalization
}

TEST_CASE("tilted ratio: zero tilt is bit-identical, constant tilts cancel") {
  FieldSample f = synthetic_field(16, 1.0, 13);
  RegionMask full = RegionMask::full(16);
  GmcParams p(1.0, 1.5, 1.0);
  std::vector<double> zero_tilt(f.values.size(), 0.0);
  CHECK(tilted_ratio(f, zero_tilt, p, full) == balanced_ratio(f, p, full));

  std::vector<double> const_tilt(f.values.size(), 7.3);
  double with_const = tilted_ratio(f, const_tilt, p, full);
  CHECK(with_const == doctest::Approx(balanced_ratio(f, p, full)).epsilon(1e-12));

  // shift invariance on a non-trivial tilt
  std::vector<double> tilt = random_smooth_tilt(16, 31);
  double base = tilted_ratio(f, tilt, p, full);
  for (auto& v : tilt) v += -4.21;
  CHECK(tilted_ratio(f, tilt, p, full) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("tilted ratio at t = 0 never exceeds the area") {
  GridSpec grid(16);
  FieldSample zero = FieldSample::zeros(grid);
  RegionMask full = RegionMask::full(grid.n);
  GmcParams p(1.0, 1.5, 0.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> tilt = random_smooth_tilt(grid.n, 4000 + i);
    CHECK(tilted_ratio(zero, tilt, p, full) <= 1.0 + 1e-9);
  }
}

TEST_CASE("subdivision: counts, groups, separation") {
  RegionMask s = RegionMask::full(16);
  auto cells = subdivide(s, 2);
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) CHECK(c.mask.cell_count() == 64);
  // all four groups distinct
  CHECK(cells[0].group + cells[1].group + cells[2].group + cells[3].group == 0 + 1 + 2 + 3);

  // union equals the region, pairwise disjoint
  RegionMask u = cells[0].mask;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    CHECK(u.disjoint_with(cells[i].mask));
    u = u.united(cells[i].mask);
  }
  CHECK(u.cell_count() == s.cell_count());

  auto cells4 = subdivide(s, 4);
  REQUIRE(cells4.size() == 16);
  int per_group[4] = {0, 0, 0, 0};
  for (const auto& c : cells4) ++per_group[c.group];
  for (int g = 0; g < 4; ++g) CHECK(per_group[g] == 4);
  // same-group squares are separated by at least the square side 1/4
  for (const auto& a : cells4)
    for (const auto& b : cells4) {
      if (&a == &b || a.group != b.group) continue;
      double dx = std::max(0.0, std::abs(a.offset_x - b.offset_x) - 0.25);
      double dy = std::max(0.0, std::abs(a.offset_y - b.offset_y) - 0.25);
      CHECK(std::max(dx, dy) >= 0.25 - 1e-12);
    }

  CHECK_THROWS_AS(subdivide(s, 3), ConfigError);
  CHECK_THROWS_AS(subdivide(s, 32), ConfigError);
  CHECK_THROWS_AS(subdivide(RegionMask::square(16, 0, 0, 3), 2), ConfigError);
}

TEST_CASE("cascade: degenerate single-cube split is an identity") {
  GridSpec grid(16);
  GmcParams p(1.0, 1.5, 1.0);
  FieldSample coarse = FieldSample::zeros(grid);
  FieldSample inc = synthetic_field(16, 1.0, 77);
  CascadeResult r = cascade_decomposition(coarse, {inc}, p, 1);
  REQUIRE(r.rhs_terms.size() == 1);
  CHECK(r.lhs == doctest::Approx(r.rhs_terms[0]).epsilon(1e-12));
}

TEST_CASE("cascade: trivial increments at t = s") {
  const double s = std::log(2.0);
  GridSpec grid(16);
  GmcParams p(1.0, 1.5, s);
  FieldSample coarse = synthetic_field(16, s, 91);
  std::vector<FieldSample> incs;
  for (int c = 0; c < 4; ++c) {
    FieldSample z = FieldSample::zeros(GridSpec(8));
    z.scale_lo = z.scale_hi = s;  // zero-variance increment
    incs.push_back(z);
  }
  CascadeResult r = cascade_decomposition(coarse, incs, p, 2);
  CHECK(r.lhs <= r.rhs_sum() * (1.0 + 1e-9));
  for (std::size_t c = 0; c < 4; ++c)
    CHECK(r.lhs_cubes[c] == doctest::Approx(r.rhs_terms[c]).epsilon(1e-9));
}

TEST_CASE("cascade: sampled replicas satisfy the subdivision bound; oracle agrees") {
  const FieldContext& ctx = test_context();
  const double s = std::log(2.0), t = 2.0;
  GridSpec grid(32);
  GmcParams p(1.0, 1.5, t);
  SampleWorkspace ws;

  for (int rep = 0; rep < 10; ++rep) {
    RngStream rs{9191, static_cast<std::uint64_t>(rep), 0};
    FieldSample coarse = ctx.sample_layer(ctx.layer(0.0, s), grid, rs.sub(0), ws);
    std::vector<FieldSample> incs;
    for (int c = 0; c < 4; ++c)
      incs.push_back(
          ctx.sample_increment_by_scaling(0.0, t - s, GridSpec(16), rs.sub(1 + c), ws));
    CascadeResult r = cascade_decomposition(coarse, incs, p, 2);

    CHECK(r.lhs <= r.rhs_sum() * (1.0 + 1e-9));
    for (std::size_t c = 0; c < 4; ++c)
      CHECK(r.lhs_cubes[c] ==
            doctest::Approx(r.rhs_terms[c]).epsilon(1e-9));

    if (rep == 0) {
      // independent direct-summation oracle for both sides
      FieldSample total = FieldSample::zeros(grid);
      total.scale_hi = t;
      for (int bx = 0; bx < 2; ++bx)
        for (int by = 0; by < 2; ++by)
          for (int a = 0; a < 16; ++a)
            for (int b = 0; b < 16; ++b)
              total.at(bx * 16 + a, by * 16 + b) =
                  coarse.at(bx * 16 + a, by * 16 + b) + incs[bx * 2 + by].at(a, b);
      double lhs_direct = direct_ratio(total, p, 0, 0, 32);
      CHECK(r.lhs == doctest::Approx(lhs_direct).epsilon(1e-9));
      double rhs_direct = 0;
      for (int bx = 0; bx < 2; ++bx)
        for (int by = 0; by < 2; ++by)
          rhs_direct += direct_ratio(total, p, bx * 16, by * 16, 16);
      CHECK(r.rhs_sum() == doctest::Approx(rhs_direct).epsilon(1e-9));
      CHECK(lhs_direct <= rhs_direct * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("mass rejects mismatched normalization scale") {
  FieldSample f = synthetic_field(16, 2.0, 1);
  CHECK_THROWS_AS(gmc_mass(f, 1.0, 1.0, RegionMask::full(16)), ConfigError);
}
