#include "adhmc/model.hpp"
#include "adhmc/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace adhmc;

namespace {

// Independent 1-d quadrature of the logcosh density on a fine grid.
struct LogcoshQuadrature {
  double epsilon, shift;
  double lo = -14.0, hi = 14.0;
  int n = 200000;
  std::vector<double> grid, cdf;

  double unnormalized(double p) const {
    return std::exp(-0.5 * p * p - epsilon * std::log(std::cosh(p - shift)));
  }

  LogcoshQuadrature(double eps, double b) : epsilon(eps), shift(b) {
    const double h = (hi - lo) / n;
    grid.resize(n + 1);
    cdf.resize(n + 1);
    cdf[0] = 0.0;
    for (int i = 0; i <= n; ++i) grid[i] = lo + i * h;
    for (int i = 1; i <= n; ++i)
      cdf[i] = cdf[i - 1] + 0.5 * h * (unnormalized(grid[i - 1]) + unnormalized(grid[i]));
    const double z = cdf[n];
    for (double& c : cdf) c /= z;
  }

  double operator()(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const double pos = (x - lo) / (hi - lo) * n;
    const int i = std::min(static_cast<int>(pos), n - 1);
    const double frac = pos - i;
    return cdf[i] * (1.0 - frac) + cdf[i + 1] * frac;
  }

  // E[f(p)] by the trapezoid rule.
  template <typename F>
  double expect(F f) const {
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      const double g = unnormalized(grid[i]);
      num += w * f(grid[i]) * g;
      den += w * g;
    }
    return num / den;
  }
};

std::vector<PotentialModel> all_potentials(int d) {
  ModelParams params;
  params.dim = d;
  std::vector<PotentialModel> out;
  for (auto id : potential_ids()) out.push_back(make_potential(id, params));
  return out;
}

std::vector<KineticModel> all_kinetics(int d) {
  ModelParams params;
  params.dim = d;
  std::vector<KineticModel> out;
  for (auto id : kinetic_ids()) out.push_back(make_kinetic(id, params));
  return out;
}

}  // namespace

TEST(Model, IdentifiersAreStable) {
  EXPECT_EQ(gaussian_potential(2).id, "gauss-iso");
  EXPECT_EQ(anisotropic_gaussian_potential(2, 10).id, "gauss-aniso");
  EXPECT_EQ(logistic_ridge_potential(2, 100, 1.0, 2.0, 7).id, "logistic-ridge");
  EXPECT_EQ(gaussian_kinetic(2).id, "kin-gauss");
  EXPECT_EQ(logcosh_kinetic(2, 0.5, 1.0).id, "kin-logcosh");
}

TEST(Model, CertificatesHoldOnRandomPairs) {
  Rng rng = make_stream(1, "cert");
  for (int d : {1, 2, 5}) {
    for (const auto& u : all_potentials(d)) {
      const auto report = verify_certificate(u, 2000, rng);
      EXPECT_EQ(report.violations, 0) << u.id << " d=" << d;
      EXPECT_GE(report.min_convexity_ratio, u.certificate.ell * (1 - 1e-9));
      EXPECT_LE(report.max_lipschitz_ratio, u.certificate.lip * (1 + 1e-9));
    }
    for (const auto& v : all_kinetics(d)) {
      const auto report = verify_certificate(v, 2000, rng);
      EXPECT_EQ(report.violations, 0) << v.id << " d=" << d;
    }
  }
}

TEST(Model, CertificateViolationIsReported) {
  EnergyFunction fn = gaussian_potential(2);
  fn.certificate = {0.25, 0.5, 0.0};  // true Lipschitz constant is 1
  Rng rng = make_stream(2, "cert");
  const auto report = verify_certificate(fn, 200, rng);
  EXPECT_GT(report.violations, 0);
  EXPECT_TRUE(report.first_violation.has_value());
}

TEST(Model, GaussianCertificateValues) {
  const auto u = anisotropic_gaussian_potential(3, 10.0);
  EXPECT_DOUBLE_EQ(u.certificate.ell, 1.0);
  EXPECT_DOUBLE_EQ(u.certificate.lip, 10.0);
  EXPECT_DOUBLE_EQ(u.certificate.third, 0.0);
  const auto one = anisotropic_gaussian_potential(1, 10.0);
  EXPECT_DOUBLE_EQ(one.hessian(Vector::Zero(1))(0, 0), 10.0);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  Rng rng = make_stream(3, "fd");
  for (int d : {1, 2, 5}) {
    for (const auto& u : all_potentials(d))
      EXPECT_LT(gradient_consistency_error(u, 200, rng), 1e-6) << u.id;
    for (const auto& v : all_kinetics(d))
      EXPECT_LT(gradient_consistency_error(v, 200, rng), 1e-6) << v.id;
  }
}

TEST(Model, LogisticComponentsSumToWhole) {
  const auto u = logistic_ridge_potential(3, 100, 1.0, 2.0, 7);
  ASSERT_TRUE(u.has_components());
  EXPECT_EQ(u.components->size(), 100u);
  Rng rng = make_stream(4, "components");
  EXPECT_LT(component_sum_error(u, 50, rng), 1e-12);
}

TEST(Model, InvalidParametersThrow) {
  EXPECT_THROW(gaussian_potential(0), ConfigError);
  EXPECT_THROW(anisotropic_gaussian_potential(2, 0.5), ConfigError);
  EXPECT_THROW(logistic_ridge_potential(2, 100, 0.0, 2.0, 7), ConfigError);
  EXPECT_THROW(logcosh_kinetic(2, -1.0, 1.0), ConfigError);
  ModelParams params;
  EXPECT_THROW(make_potential("no-such-model", params), ConfigError);
  EXPECT_THROW(make_kinetic("kin-nope", params), ConfigError);
  SmoothnessCertificate bad{2.0, 1.0, 0.0};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Model, LogcoshSamplerMatchesQuadratureCdf) {
  const auto v = logcosh_kinetic(1, 0.5, 1.0);
  const LogcoshQuadrature cdf(0.5, 1.0);
  Rng rng = make_stream(5, "logcosh");
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) draws.push_back(sample_auxiliary(v, rng)[0]);
  EXPECT_LT(stats::ks_statistic(draws, [&](double x) { return cdf(x); }), 0.01);
}

TEST(Model, LogcoshMomentsMatchQuadrature) {
  const auto v = logcosh_kinetic(1, 0.5, 1.0);
  const LogcoshQuadrature q(0.5, 1.0);
  const auto grad = [](double p) { return p + 0.5 * std::tanh(p - 1.0); };
  const auto& m = v.moments;
  EXPECT_NEAR(m.mean[0], q.expect([](double p) { return p; }), 1e-7);
  EXPECT_NEAR(m.sigma2, q.expect([](double p) { return p * p; }), 1e-7);
  EXPECT_NEAR(m.sigma4, q.expect([](double p) { return std::pow(p, 4); }), 1e-6);
  EXPECT_NEAR(m.grad_norm_sq_mean, q.expect([&](double p) { return grad(p) * grad(p); }), 1e-7);
  EXPECT_NEAR(m.grad_norm_mean, q.expect([&](double p) { return std::abs(grad(p)); }), 1e-6);
  EXPECT_NEAR(m.mu(0, 0), m.grad_norm_sq_mean, 1e-12);
  // E[V''] = E[(V')^2] by integration by parts
  EXPECT_NEAR(m.sigma(0, 0), m.mu(0, 0), 1e-6);
}

TEST(Model, GaussianKineticMomentsAreClosedForm) {
  for (int d : {1, 2, 5}) {
    const auto m = gaussian_kinetic(d).moments;
    EXPECT_DOUBLE_EQ(m.grad_norm_sq_mean, d);
    EXPECT_DOUBLE_EQ(m.sigma2, 1.0);
    EXPECT_DOUBLE_EQ(m.sigma4, 3.0);
    EXPECT_NEAR(m.sigma_p, std::sqrt(d), 1e-15);
    EXPECT_TRUE(m.mu.isApprox(Matrix::Identity(d, d)));
  }
  EXPECT_NEAR(gaussian_kinetic(1).moments.grad_norm_mean,
              std::sqrt(2.0 / std::numbers::pi), 1e-14);
  // E|p| for a 2-d standard normal is sqrt(pi/2)
  EXPECT_NEAR(gaussian_kinetic(2).moments.grad_norm_mean,
              std::sqrt(std::numbers::pi / 2.0), 1e-14);
}

TEST(Model, MonteCarloMomentsAgreeWithDescriptors) {
  Rng rng = make_stream(6, "moments");
  for (const auto& v : all_kinetics(2)) {
    const auto est = estimate_moments(v, 200000, rng);
    EXPECT_NEAR(est.value.grad_norm_sq_mean, v.moments.grad_norm_sq_mean,
                5 * est.se.grad_norm_sq_mean) << v.id;
    EXPECT_NEAR(est.value.grad_norm_mean, v.moments.grad_norm_mean,
                5 * est.se.grad_norm_mean) << v.id;
    EXPECT_NEAR(est.value.sigma2, v.moments.sigma2, 5 * est.se.sigma2) << v.id;
  }
  EXPECT_THROW(estimate_moments(gaussian_kinetic(1), 10, rng), ConfigError);
}

TEST(Model, ExactSamplerMatchesPrecisions) {
  const auto u = anisotropic_gaussian_potential(2, 4.0);
  ASSERT_TRUE(u.exact_sampler);
  Rng rng = make_stream(7, "exact");
  std::vector<double> x0, x1;
  for (int i = 0; i < 100000; ++i) {
    const Vector q = u.exact_sampler(rng);
    x0.push_back(q[0]);
    x1.push_back(q[1]);
  }
  // lambda = (1, 4): variances 1 and 1/4
  EXPECT_NEAR(stats::variance(x0), 1.0, 0.02);
  EXPECT_NEAR(stats::variance(x1), 0.25, 0.005);
  ASSERT_TRUE(u.sigma_q.has_value());
  EXPECT_NEAR(*u.sigma_q, std::sqrt(1.25), 1e-14);
}
