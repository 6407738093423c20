#include <doctest.h>

#include <cmath>

#include "gmclab/errors.hpp"
#include "gmclab/kahane.hpp"

using namespace gmclab;

namespace {

// squared-exponential covariance over a k x k grid of sites in S
GaussianVectorSpec grid_spec(int k, double scale, double corr_len,
                             const std::string& label) {
  int n = k * k;
  Eigen::MatrixXd cov(n, n);
  for (int a = 0; a < n; ++a) {
    double ax = (a % k + 0.5) / k, ay = (a / k + 0.5) / k;
    for (int b = 0; b < n; ++b) {
      double bx = (b % k + 0.5) / k, by = (b / k + 0.5) / k;
      double d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
      cov(a, b) = scale * std::exp(-d2 / (corr_len * corr_len));
    }
  }
  GaussianVectorSpec spec;
  spec.covariance = cov;
  spec.label = label;
  return spec;
}

Eigen::VectorXd uniform_weights(int n) {
  return Eigen::VectorXd::Constant(n, 1.0 / n);
}

RngStream stream(std::uint64_t s) { return RngStream{5150, s, 0}; }

}  // namespace

TEST_CASE("constant-in-law path: estimates agree across t") {
  GaussianVectorSpec x = grid_spec(4, 1.0, 0.5, "x");
  InterpolationPath path{x, x};
  auto func = ProductFunctionalSpec::ratio_functional(1.0, 1.5, uniform_weights(16),
                                                      uniform_weights(16));
  McEstimate e0 = interpolated_expectation(path, func, 0.0, 30000, stream(21));
  McEstimate e5 = interpolated_expectation(path, func, 0.5, 30000, stream(21));
  McEstimate e1 = interpolated_expectation(path, func, 1.0, 30000, stream(21));
  CHECK(std::abs(e0.value - e5.value) <= 3.0 * std::hypot(e0.se, e5.se));
  CHECK(std::abs(e0.value - e1.value) <= 3.0 * std::hypot(e0.se, e1.se));
}

TEST_CASE("single point, single unit factor: martingale mean 1") {
  GaussianVectorSpec x;
  x.covariance = Eigen::MatrixXd::Constant(1, 1, 0.7);
  GaussianVectorSpec y;
  y.covariance = Eigen::MatrixXd::Constant(1, 1, 1.9);
  InterpolationPath path{x, y};
  ProductFunctionalSpec func;
  func.factors.push_back({1.0, 1.0, Eigen::VectorXd::Constant(1, 1.0)});
  for (double t : {0.0, 0.3, 1.0}) {
    McEstimate e = interpolated_expectation(path, func, t, 40000, stream(2));
    CHECK(std::abs(e.value - 1.0) <= 3.0 * e.se);
  }
}

TEST_CASE("derivative formula: structural zeros") {
  GaussianVectorSpec x = grid_spec(3, 0.8, 0.4, "x");
  InterpolationPath same{x, x};
  auto func = ProductFunctionalSpec::ratio_functional(0.8, 1.2, uniform_weights(9),
                                                      uniform_weights(9));
  McEstimate d = derivative_formula(same, func, 0.5, 2000, stream(3));
  CHECK(d.value == 0.0);  // g == 0 makes every replica vanish
  CHECK(d.se == 0.0);

  GaussianVectorSpec y = grid_spec(3, 1.3, 0.6, "y");
  InterpolationPath path{x, y};
  ProductFunctionalSpec linear;
  linear.factors.push_back({1.0, 1.0, uniform_weights(9)});
  McEstimate d2 = derivative_formula(path, linear, 0.25, 2000, stream(4));
  CHECK(d2.value == 0.0);  // p(p-1) = 0 and no cross terms
}

TEST_CASE("derivative formula matches the finite-difference oracle") {
  GaussianVectorSpec x = grid_spec(4, 1.0, 0.45, "x");
  GaussianVectorSpec y = grid_spec(4, 1.35, 0.7, "y");
  InterpolationPath path{x, y};
  auto func = ProductFunctionalSpec::ratio_functional(1.0, 1.5, uniform_weights(16),
                                                      uniform_weights(16));
  const double t = 0.5, eps = 0.05;
  const std::size_t reps = 60000;
  McEstimate diff = interpolated_difference(path, func, t - eps, t + eps, reps, stream(5));
  McEstimate fd{diff.value / (2 * eps), diff.se / (2 * eps), diff.replicas};
  McEstimate df = derivative_formula(path, func, t, reps, stream(5));
  CHECK(std::abs(fd.value - df.value) <= 3.0 * std::hypot(fd.se, df.se));
}

TEST_CASE("derivative is nonnegative for the ratio functional under PSD increase") {
  GaussianVectorSpec x = grid_spec(4, 1.0, 0.5, "x");
  GaussianVectorSpec y = x;
  y.covariance = x.covariance + 0.6 * Eigen::MatrixXd::Ones(16, 16);  // PSD bump
  InterpolationPath path{x, y};
  auto func = ProductFunctionalSpec::ratio_functional(1.0, 1.5, uniform_weights(16),
                                                      uniform_weights(16));
  for (double t : {0.1, 0.5, 0.9}) {
    McEstimate d = derivative_formula(path, func, t, 30000, stream(6));
    CHECK(d.value >= -3.0 * d.se);
  }
}

TEST_CASE("variant bound: identical fields") {
  GaussianVectorSpec x = grid_spec(3, 1.0, 0.5, "x");
  auto func = ProductFunctionalSpec::ratio_functional(1.0, 1.5, uniform_weights(9),
                                                      uniform_weights(9));
  VariantReport rep = check_kahane_variant(x, x, func, 5000, stream(7));
  CHECK(rep.bound_a == 0.0);
  CHECK(rep.bound_c == 0.0);
  CHECK(rep.passed());
}

TEST_CASE("variant bound: common unit Gaussian shift, square factor") {
  GaussianVectorSpec x = grid_spec(3, 1.0, 0.5, "x");
  GaussianVectorSpec y = x;
  y.covariance = x.covariance + Eigen::MatrixXd::Ones(9, 9);  // A = 1
  ProductFunctionalSpec square;
  square.factors.push_back({2.0, 1.0, uniform_weights(9)});
  VariantReport rep = check_kahane_variant(x, y, square, 100000, stream(8));
  CHECK(rep.bound_a == doctest::Approx(1.0));
  CHECK(rep.bound_c == doctest::Approx(2.0));  // |gamma^2 p (p-1)| = 2
  CHECK(rep.passed());
  // the exact ratio here is e (common factor e^{2N-1} has mean e): well
  // inside e^C = e^2
  CHECK(rep.side_y.value / rep.side_x.value ==
        doctest::Approx(std::exp(1.0)).epsilon(0.1));
}

TEST_CASE("variant bound: ratio functional under a flat covariance shift") {
  GaussianVectorSpec x = grid_spec(4, 1.0, 0.5, "x");
  GaussianVectorSpec y = x;
  y.covariance = x.covariance + 0.5 * Eigen::MatrixXd::Ones(16, 16);
  auto func = ProductFunctionalSpec::ratio_functional(1.0, 1.5, uniform_weights(16),
                                                      uniform_weights(16));
  VariantReport rep = check_kahane_variant(x, y, func, 50000, stream(9));
  CHECK(rep.bound_a == doctest::Approx(0.5));
  CHECK(rep.passed());
  // balanced exponents cancel the random common factor pathwise, leaving
  // only the deterministic normalization drift e^{alpha gamma A / 2}
  double drift = std::exp(0.5 * 1.0 * 1.5 * rep.bound_a);
  CHECK(rep.side_y.value / rep.side_x.value == doctest::Approx(drift).epsilon(0.02));
  CHECK(drift <= std::exp(rep.bound_c));
}

TEST_CASE("convex order: identical fields and common-noise increase") {
  GaussianVectorSpec x = grid_spec(4, 1.0, 0.5, "x");
  Eigen::VectorXd lambda = uniform_weights(16), nu = uniform_weights(16);

  ConvexOrderReport same = check_convex_order(x, x, 1.0, 1.5, lambda, nu, 20000, stream(10));
  CHECK(same.passed());

  GaussianVectorSpec y = x;
  y.covariance = x.covariance + 0.8 * Eigen::MatrixXd::Ones(16, 16);
  ConvexOrderReport rep = check_convex_order(x, y, 1.0, 1.5, lambda, nu, 50000, stream(11));
  CHECK(rep.passed());
  REQUIRE(rep.cases.size() == 3);
  CHECK(rep.cases[0].family == "identity");
}

TEST_CASE("convex order: monotone in the remainder variance") {
  GaussianVectorSpec x = grid_spec(4, 1.0, 0.5, "x");
  Eigen::VectorXd w = uniform_weights(16);
  auto with_noise = [&](double v) {
    GaussianVectorSpec y = x;
    y.covariance = x.covariance + v * Eigen::MatrixXd::Ones(16, 16);
    // common random numbers across the chain
    return check_convex_order(x, y, 1.0, 1.5, w, w, 60000, stream(12));
  };
  ConvexOrderReport r1 = with_noise(0.3);
  ConvexOrderReport r2 = with_noise(0.9);
  for (std::size_t c = 0; c < 3; ++c) {
    double se = std::hypot(r1.cases[c].se_diff, r2.cases[c].se_diff) +
                1e-9 * std::abs(r1.cases[c].est_y);
    CHECK(r1.cases[c].est_y <= r2.cases[c].est_y + 3.0 * se);
  }
}

TEST_CASE("convex order rejects a non-PSD difference") {
  GaussianVectorSpec x = grid_spec(3, 1.0, 0.5, "x");
  GaussianVectorSpec y = grid_spec(3, 0.5, 0.5, "y");  // smaller: difference ND
  CHECK_THROWS_AS(check_convex_order(x, y, 1.0, 1.5, uniform_weights(9), uniform_weights(9),
                                     1000, stream(13)),
                  ConfigError);
}

TEST_CASE("spec validation") {
  GaussianVectorSpec bad;
  bad.covariance = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  Eigen::MatrixXd nd(2, 2);
  nd << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  GaussianVectorSpec neg;
  neg.covariance = nd;
  CHECK_THROWS_AS(neg.validate(), ConfigError);

  ProductFunctionalSpec f;
  CHECK_THROWS_AS(f.validate(4), ConfigError);
  f.factors.push_back({1.0, 1.0, Eigen::VectorXd::Constant(4, -1.0)});
  CHECK_THROWS_AS(f.validate(4), ConfigError);
}
