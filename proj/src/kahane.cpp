#include "gmclab/kahane.hpp"

#include <algorithm>
#include <cmath>

#include "gmclab/errors.hpp"

namespace gmclab {

namespace {
constexpr double kPsdTol = 1e-10;

double mean_and_se(const std::vector<double>& v, double* se) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s2 = 0;
  for (double x : v) s2 += (x - m) * (x - m);
  *se = v.size() > 1 ? std::sqrt(s2 / (static_cast<double>(v.size()) - 1) /
                                 static_cast<double>(v.size()))
                     : 0.0;
  return m;
}
}  // namespace

void GaussianVectorSpec::validate() const {
  if (covariance.rows() != covariance.cols()) throw ConfigError("covariance not square");
  if (covariance.rows() < 1 || covariance.rows() > 64)
    throw ConfigError("covariance must cover 1..64 sites");
  if (!covariance.isApprox(covariance.transpose(), 1e-12))
    throw ConfigError("covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  if (es.eigenvalues().minCoeff() < -kPsdTol)
    throw ConfigError("covariance not PSD (min eigenvalue " +
                      std::to_string(es.eigenvalues().minCoeff()) + ")");
}

ProductFunctionalSpec ProductFunctionalSpec::ratio_functional(double alpha, double gamma,
                                                              Eigen::VectorXd lambda,
                                                              Eigen::VectorXd nu) {
  if (alpha == gamma) throw ConfigError("ratio functional needs distinct parameters");
  ProductFunctionalSpec f;
  f.factors.push_back({gamma / (gamma - alpha), alpha, std::move(lambda)});
  f.factors.push_back({-alpha / (gamma - alpha), gamma, std::move(nu)});
  return f;
}

void ProductFunctionalSpec::validate(int n_sites) const {
  if (factors.empty()) throw ConfigError("product functional has no factors");
  for (const auto& fac : factors) {
    if (fac.mu.size() != n_sites) throw ConfigError("weight vector size mismatch");
    for (int i = 0; i < fac.mu.size(); ++i)
      if (!(fac.mu[i] >= 0) || !std::isfinite(fac.mu[i]))
        throw ConfigError("weights must be nonnegative and finite");
    if (fac.mu.sum() <= 0) throw ConfigError("weights must not vanish");
  }
}

void InterpolationPath::validate() const {
  x.validate();
  y.validate();
  if (x.size() != y.size()) throw ConfigError("path endpoints differ in size");
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() < -kPsdTol)
    throw ConfigError("matrix not PSD within tolerance");
  Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

struct PathSampler {
  Eigen::MatrixXd root_x, root_y;
  Eigen::VectorXd var_x, var_y;
  int n;

  explicit PathSampler(const InterpolationPath& path)
      : root_x(psd_sqrt(path.x.covariance)),
        root_y(psd_sqrt(path.y.covariance)),
        var_x(path.x.covariance.diagonal()),
        var_y(path.y.covariance.diagonal()),
        n(path.x.size()) {}

  // draws (X, Y) and forms Z(t), its variance profile, and per-factor
  // ln of the tilted sums plus the tilted probability weights
  void draw(NormalSource& src, double t, Eigen::VectorXd* z, Eigen::VectorXd* var) const {
    Eigen::VectorXd u(n), v(n);
    src.fill(u.data(), static_cast<std::size_t>(n));
    src.fill(v.data(), static_cast<std::size_t>(n));
    double a = std::sqrt(1.0 - t), b = std::sqrt(t);
    *z = a * (root_x * u) + b * (root_y * v);
    *var = (1.0 - t) * var_x + t * var_y;
  }
};

// ln sum_x e^{g z_x - g^2 var_x / 2} mu(x), and optionally the normalized
// tilted weights
double ln_tilted_sum(const Eigen::VectorXd& z, const Eigen::VectorXd& var, double g,
                     const Eigen::VectorXd& mu, Eigen::VectorXd* weights) {
  int n = static_cast<int>(z.size());
  Eigen::VectorXd expo = g * z - 0.5 * g * g * var;
  double m = -HUGE_VAL;
  for (int i = 0; i < n; ++i)
    if (mu[i] > 0) m = std::max(m, expo[i]);
  double sum = 0;
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = mu[i] > 0 ? mu[i] * std::exp(expo[i] - m) : 0.0;
    sum += w[i];
  }
  if (weights) *weights = w / sum;
  return m + std::log(sum);
}

double phi_value(const ProductFunctionalSpec& func, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& var, std::vector<Eigen::VectorXd>* tilted) {
  double ln_phi = 0;
  if (tilted) tilted->resize(func.factors.size());
  for (std::size_t j = 0; j < func.factors.size(); ++j) {
    const auto& fac = func.factors[j];
    Eigen::VectorXd* w = tilted ? &(*tilted)[j] : nullptr;
    ln_phi += fac.p * ln_tilted_sum(z, var, fac.gamma, fac.mu, w);
  }
  return std::exp(ln_phi);
}

}  // namespace

McEstimate interpolated_expectation(const InterpolationPath& path,
                                    const ProductFunctionalSpec& func, double t,
                                    std::size_t replicas, const RngStream& rng) {
  path.validate();
  func.validate(path.x.size());
  if (replicas < 2) throw ConfigError("need at least 2 replicas");
  if (!(t >= 0.0) || !(t <= 1.0)) throw ConfigError("interpolation t must be in [0,1]");

  PathSampler ps(path);
  NormalSource src(rng);
  std::vector<double> vals(replicas);
  Eigen::VectorXd z, var;
  for (std::size_t r = 0; r < replicas; ++r) {
    ps.draw(src, t, &z, &var);
    vals[r] = phi_value(func, z, var, nullptr);
  }
  McEstimate est;
  est.replicas = replicas;
  est.value = mean_and_se(vals, &est.se);
  return est;
}

McEstimate interpolated_difference(const InterpolationPath& path,
                                   const ProductFunctionalSpec& func, double t1, double t2,
                                   std::size_t replicas, const RngStream& rng) {
  path.validate();
  func.validate(path.x.size());
  if (replicas < 2) throw ConfigError("need at least 2 replicas");

  PathSampler ps(path);
  NormalSource src(rng);
  const int n = path.x.size();
  std::vector<double> vals(replicas);
  Eigen::VectorXd u(n), v(n), z, var;
  for (std::size_t r = 0; r < replicas; ++r) {
    src.fill(u.data(), static_cast<std::size_t>(n));
    src.fill(v.data(), static_cast<std::size_t>(n));
    auto phi_at = [&](double t) {
      Eigen::VectorXd x = ps.root_x * u, y = ps.root_y * v;
      z = std::sqrt(1.0 - t) * x + std::sqrt(t) * y;
      var = (1.0 - t) * ps.var_x + t * ps.var_y;
      return phi_value(func, z, var, nullptr);
    };
    vals[r] = phi_at(t2) - phi_at(t1);
  }
  McEstimate est;
  est.replicas = replicas;
  est.value = mean_and_se(vals, &est.se);
  return est;
}

McEstimate derivative_formula(const InterpolationPath& path,
                              const ProductFunctionalSpec& func, double t,
                              std::size_t replicas, const RngStream& rng) {
  path.validate();
  func.validate(path.x.size());
  if (replicas < 2) throw ConfigError("need at least 2 replicas");

  const Eigen::MatrixXd g = path.y.covariance - path.x.covariance;
  PathSampler ps(path);
  NormalSource src(rng);
  std::vector<double> vals(replicas);
  Eigen::VectorXd z, var;
  std::vector<Eigen::VectorXd> tilted;
  const std::size_t nf = func.factors.size();
  for (std::size_t r = 0; r < replicas; ++r) {
    ps.draw(src, t, &z, &var);
    double phi = phi_value(func, z, var, &tilted);
    double quad = 0;
    for (std::size_t j = 0; j < nf; ++j) {
      const auto& fj = func.factors[j];
      quad += fj.gamma * fj.gamma * fj.p * (fj.p - 1.0) *
              tilted[j].dot(g * tilted[j]);
      for (std::size_t i = 0; i < j; ++i) {
        const auto& fi = func.factors[i];
        quad += 2.0 * fi.gamma * fj.gamma * fi.p * fj.p * tilted[i].dot(g * tilted[j]);
      }
    }
    vals[r] = 0.5 * phi * quad;
  }
  McEstimate est;
  est.replicas = replicas;
  est.value = mean_and_se(vals, &est.se);
  return est;
}

VariantReport check_kahane_variant(const GaussianVectorSpec& x, const GaussianVectorSpec& y,
                                   const ProductFunctionalSpec& func, std::size_t replicas,
                                   const RngStream& rng) {
  InterpolationPath path{x, y};
  path.validate();
  func.validate(x.size());

  VariantReport rep;
  rep.bound_a = (x.covariance - y.covariance).cwiseAbs().maxCoeff();
  double c = 0;
  for (std::size_t j = 0; j < func.factors.size(); ++j) {
    const auto& fj = func.factors[j];
    c += std::abs(fj.gamma * fj.gamma * fj.p * (fj.p - 1.0));
    for (std::size_t i = 0; i < j; ++i) {
      const auto& fi = func.factors[i];
      c += 2.0 * std::abs(fi.gamma * fj.gamma * fi.p * fj.p);
    }
  }
  rep.bound_c = rep.bound_a * c;

  // common random numbers on both endpoints
  rep.side_x = interpolated_expectation(path, func, 0.0, replicas, rng);
  rep.side_y = interpolated_expectation(path, func, 1.0, replicas, rng);

  double ec = std::exp(rep.bound_c);
  double se_fwd = std::sqrt(rep.side_x.se * rep.side_x.se +
                            ec * rep.side_y.se * ec * rep.side_y.se);
  double se_bwd = std::sqrt(rep.side_y.se * rep.side_y.se +
                            ec * rep.side_x.se * ec * rep.side_x.se);
  rep.forward_ok = rep.side_x.value <= ec * rep.side_y.value + 3.0 * se_fwd;
  rep.backward_ok = rep.side_y.value <= ec * rep.side_x.value + 3.0 * se_bwd;
  return rep;
}

bool ConvexOrderReport::passed() const {
  for (const auto& c : cases)
    if (!c.ok) return false;
  return !cases.empty();
}

ConvexOrderReport check_convex_order(const GaussianVectorSpec& x,
                                     const GaussianVectorSpec& y, double alpha,
                                     double gamma, const Eigen::VectorXd& lambda,
                                     const Eigen::VectorXd& nu, std::size_t replicas,
                                     const RngStream& rng) {
  x.validate();
  y.validate();
  if (x.size() != y.size()) throw ConfigError("specs differ in size");
  Eigen::MatrixXd diff = y.covariance - x.covariance;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
  if (es.eigenvalues().minCoeff() < -kPsdTol)
    throw ConfigError("covariance difference is not PSD: convex-order hypothesis fails");

  ProductFunctionalSpec func = ProductFunctionalSpec::ratio_functional(alpha, gamma, lambda, nu);
  func.validate(x.size());

  const int n = x.size();
  Eigen::MatrixXd root_x = psd_sqrt(x.covariance);
  Eigen::MatrixXd root_w = psd_sqrt(diff);
  Eigen::VectorXd var_x = x.covariance.diagonal();
  Eigen::VectorXd var_y = y.covariance.diagonal();

  // coupled draws: Y = X + W with W independent of X
  NormalSource src(rng);
  std::vector<double> qx(replicas), qy(replicas);
  Eigen::VectorXd u(n), w(n);
  for (std::size_t r = 0; r < replicas; ++r) {
    src.fill(u.data(), static_cast<std::size_t>(n));
    src.fill(w.data(), static_cast<std::size_t>(n));
    Eigen::VectorXd xv = root_x * u;
    Eigen::VectorXd yv = xv + root_w * w;
    double lx = 0, ly = 0;
    for (const auto& fac : func.factors) {
      lx += fac.p * ln_tilted_sum(xv, var_x, fac.gamma, fac.mu, nullptr);
      ly += fac.p * ln_tilted_sum(yv, var_y, fac.gamma, fac.mu, nullptr);
    }
    qx[r] = std::exp(lx);
    qy[r] = std::exp(ly);
  }

  double median;
  {
    std::vector<double> tmp = qx;
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    median = tmp[tmp.size() / 2];
  }
  const double mu_exp = 0.25;

  ConvexOrderReport rep;
  auto run_case = [&](const std::string& name, auto f) {
    ConvexOrderCase c;
    c.family = name;
    std::vector<double> fx(replicas), fy(replicas), d(replicas);
    for (std::size_t r = 0; r < replicas; ++r) {
      fx[r] = f(qx[r]);
      fy[r] = f(qy[r]);
      d[r] = fy[r] - fx[r];
    }
    double se_x, se_y;
    c.est_x = mean_and_se(fx, &se_x);
    c.est_y = mean_and_se(fy, &se_y);
    double se_d;
    double mean_d = mean_and_se(d, &se_d);
    c.se_diff = se_d;
    c.ok = mean_d >= -3.0 * se_d;
    rep.cases.push_back(c);
  };
  run_case("identity", [](double q) { return q; });
  run_case("hinge", [median](double q) { return std::max(q - median, 0.0); });
  run_case("exp", [mu_exp](double q) { return std::exp(mu_exp * q); });
  return rep;
}

}  // namespace gmclab
