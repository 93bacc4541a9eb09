#include "adhmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace adhmc {

namespace {

constexpr long kMaxRejectionAttempts = 1'000'000;

Vector standard_normal(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Moments of the 1-d density exp(-v(p)) by composite Simpson quadrature.
struct CoordinateMoments {
  double mean, m2, m4, dv_sq, d2v, abs_dv;
};

template <class V, class DV, class D2V>
CoordinateMoments coordinate_moments(V v, DV dv, D2V d2v, double lo,
                                     double hi) {
  constexpr int kIntervals = 40000;
  const double h = (hi - lo) / kIntervals;
  double z = 0, s1 = 0, s2 = 0, s4 = 0, sdv2 = 0, sd2v = 0, sadv = 0;
  for (int k = 0; k <= kIntervals; ++k) {
    const double x = lo + k * h;
    const double w = (k == 0 || k == kIntervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const double f = w * std::exp(-v(x));
    const double g = dv(x);
    z += f;
    s1 += f * x;
    s2 += f * x * x;
    s4 += f * x * x * x * x;
    sdv2 += f * g * g;
    sd2v += f * d2v(x);
    sadv += f * std::abs(g);
  }
  return {s1 / z, s2 / z, s4 / z, sdv2 / z, sd2v / z, sadv / z};
}

}  // namespace

void SmoothnessCertificate::validate() const {
  std::vector<std::string> errors;
  if (!(ell > 0.0)) errors.emplace_back("certificate ell must be > 0");
  if (!(lip >= ell) || !std::isfinite(lip))
    errors.emplace_back("certificate requires ell <= lip < inf");
  if (!(third >= 0.0) || !std::isfinite(third))
    errors.emplace_back("certificate third-derivative bound must be >= 0");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

const char* to_string(SigmaVReading reading) {
  return reading == SigmaVReading::squared ? "squared" : "first-power";
}

std::vector<std::string_view> potential_ids() {
  return {kGaussIso, kGaussAniso, kLogisticRidge};
}

std::vector<std::string_view> kinetic_ids() { return {kKinGauss, kKinLogcosh}; }

PotentialModel gaussian_potential(int dim) {
  require(dim >= 1, "potential dimension must be >= 1");
  PotentialModel m;
  m.id = std::string(kGaussIso);
  m.dim = dim;
  m.energy = [](const Vector& q) { return 0.5 * q.squaredNorm(); };
  m.gradient = [](const Vector& q) -> Vector { return q; };
  m.hessian = [dim](const Vector&) -> Matrix {
    return Matrix::Identity(dim, dim);
  };
  m.certificate = {1.0, 1.0, 0.0};
  m.sigma_q = std::sqrt(static_cast<double>(dim));
  m.exact_sampler = [dim](Rng& rng) { return standard_normal(dim, rng); };
  return m;
}

PotentialModel anisotropic_gaussian_potential(int dim, double kappa) {
  require(dim >= 1, "potential dimension must be >= 1");
  require(kappa >= 1.0 && std::isfinite(kappa), "kappa must be >= 1");
  Vector lambda(dim);
  if (dim == 1) {
    lambda[0] = kappa;
  } else {
    for (int i = 0; i < dim; ++i)
      lambda[i] = std::pow(kappa, static_cast<double>(i) / (dim - 1));
  }
  PotentialModel m;
  m.id = std::string(kGaussAniso);
  m.dim = dim;
  m.energy = [lambda](const Vector& q) {
    return 0.5 * (lambda.array() * q.array().square()).sum();
  };
  m.gradient = [lambda](const Vector& q) -> Vector {
    return lambda.cwiseProduct(q);
  };
  m.hessian = [lambda](const Vector&) -> Matrix {
    return lambda.asDiagonal();
  };
  m.certificate = {lambda.minCoeff(), lambda.maxCoeff(), 0.0};
  m.sigma_q = std::sqrt(lambda.cwiseInverse().sum());
  const Vector scale = lambda.cwiseSqrt().cwiseInverse();
  m.exact_sampler = [dim, scale](Rng& rng) -> Vector {
    return standard_normal(dim, rng).cwiseProduct(scale);
  };
  return m;
}

namespace {

struct LogisticData {
  Matrix x;  // n x d
  Vector y;  // +-1
  double ridge;
};

// sup |d^3/dz^3 softplus(z)| = max sigma(1-sigma)(1-2sigma) = 1/(6 sqrt 3)
constexpr double kSoftplusThird = 1.0 / (6.0 * 1.7320508075688772);

}  // namespace

PotentialModel logistic_ridge_potential(int dim, int n, double ridge,
                                        double feature_scale,
                                        std::uint64_t data_seed) {
  std::vector<std::string> errors;
  if (dim < 1) errors.emplace_back("potential dimension must be >= 1");
  if (n < 1) errors.emplace_back("logistic-ridge needs n >= 1");
  if (!(ridge > 0.0)) errors.emplace_back("logistic-ridge needs ridge > 0");
  if (!(feature_scale > 0.0))
    errors.emplace_back("logistic-ridge needs feature_scale > 0");
  if (!errors.empty()) throw ConfigError(std::move(errors));

  auto data = std::make_shared<LogisticData>();
  data->ridge = ridge;
  data->x.resize(n, dim);
  data->y.resize(n);
  Rng rng(data_seed);
  std::normal_distribution<double> normal(0.0, feature_scale / std::sqrt(n));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) data->x(i, j) = normal(rng);
    const double prob = sigmoid(data->x.row(i).sum());
    data->y[i] = unif(rng) < prob ? 1.0 : -1.0;
  }

  PotentialModel m;
  m.id = std::string(kLogisticRidge);
  m.dim = dim;
  m.energy = [data](const Vector& q) {
    const Vector margin = data->y.cwiseProduct(data->x * q);
    double u = 0.5 * data->ridge * q.squaredNorm();
    for (Eigen::Index i = 0; i < margin.size(); ++i) u += softplus(-margin[i]);
    return u;
  };
  m.gradient = [data](const Vector& q) -> Vector {
    const Vector margin = data->y.cwiseProduct(data->x * q);
    Vector w(margin.size());
    for (Eigen::Index i = 0; i < margin.size(); ++i)
      w[i] = -data->y[i] * sigmoid(-margin[i]);
    return data->x.transpose() * w + data->ridge * q;
  };
  m.hessian = [data](const Vector& q) -> Matrix {
    const Vector margin = data->y.cwiseProduct(data->x * q);
    Vector w(margin.size());
    for (Eigen::Index i = 0; i < margin.size(); ++i) {
      const double s = sigmoid(margin[i]);
      w[i] = s * (1.0 - s);
    }
    Matrix h = data->x.transpose() * w.asDiagonal() * data->x;
    h.diagonal().array() += data->ridge;
    return h;
  };

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(data->x.transpose() *
                                                  data->x);
  double third = 0.0;
  for (int i = 0; i < n; ++i)
    third += kSoftplusThird * std::pow(data->x.row(i).norm(), 3);
  m.certificate = {ridge, ridge + 0.25 * eig.eigenvalues().maxCoeff(), third};

  auto components = std::make_shared<std::vector<EnergyFunction>>();
  components->reserve(n);
  const double share = ridge / n;
  for (int i = 0; i < n; ++i) {
    EnergyFunction c;
    c.dim = dim;
    c.energy = [data, i, share](const Vector& q) {
      const double margin = data->y[i] * data->x.row(i).dot(q);
      return softplus(-margin) + 0.5 * share * q.squaredNorm();
    };
    c.gradient = [data, i, share](const Vector& q) -> Vector {
      const double margin = data->y[i] * data->x.row(i).dot(q);
      return (-data->y[i] * sigmoid(-margin)) * data->x.row(i).transpose() +
             share * q;
    };
    c.hessian = [data, i, share, dim](const Vector& q) -> Matrix {
      const double s = sigmoid(data->y[i] * data->x.row(i).dot(q));
      Matrix h = s * (1.0 - s) * data->x.row(i).transpose() * data->x.row(i);
      h.diagonal().array() += share;
      return h;
    };
    const double norm = data->x.row(i).norm();
    c.certificate = {share, share + 0.25 * norm * norm,
                     kSoftplusThird * norm * norm * norm};
    components->push_back(std::move(c));
  }
  m.components = std::move(components);
  return m;
}

KineticModel gaussian_kinetic(int dim) {
  require(dim >= 1, "kinetic dimension must be >= 1");
  KineticModel k;
  k.id = std::string(kKinGauss);
  k.dim = dim;
  k.energy = [](const Vector& p) { return 0.5 * p.squaredNorm(); };
  k.gradient = [](const Vector& p) -> Vector { return p; };
  k.hessian = [dim](const Vector&) -> Matrix {
    return Matrix::Identity(dim, dim);
  };
  k.certificate = {1.0, 1.0, 0.0};
  k.sampler = [dim](Rng& rng) { return standard_normal(dim, rng); };

  auto& m = k.moments;
  m.mu = Matrix::Identity(dim, dim);
  m.sigma = Matrix::Identity(dim, dim);
  m.mean = Vector::Zero(dim);
  // E ||p|| = sqrt(2) Gamma((d+1)/2) / Gamma(d/2)
  m.grad_norm_mean = std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (dim + 1)) -
                                               std::lgamma(0.5 * dim));
  m.grad_norm_sq_mean = dim;
  m.sigma2 = 1.0;
  m.sigma4 = 3.0;
  m.sigma_p = std::sqrt(static_cast<double>(dim));
  return k;
}

KineticModel logcosh_kinetic(int dim, double epsilon, double shift) {
  std::vector<std::string> errors;
  if (dim < 1) errors.emplace_back("kinetic dimension must be >= 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    errors.emplace_back("kin-logcosh needs epsilon >= 0");
  if (!std::isfinite(shift)) errors.emplace_back("kin-logcosh needs finite shift");
  if (!errors.empty()) throw ConfigError(std::move(errors));

  KineticModel k;
  k.id = std::string(kKinLogcosh);
  k.dim = dim;
  k.energy = [epsilon, shift](const Vector& p) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      v += 0.5 * p[i] * p[i] + epsilon * log_cosh(p[i] - shift);
    return v;
  };
  k.gradient = [epsilon, shift](const Vector& p) -> Vector {
    Vector g(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i)
      g[i] = p[i] + epsilon * std::tanh(p[i] - shift);
    return g;
  };
  k.hessian = [epsilon, shift](const Vector& p) -> Matrix {
    Vector h(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double c = std::cosh(p[i] - shift);
      h[i] = 1.0 + epsilon / (c * c);
    }
    return h.asDiagonal();
  };
  // |d^3/dx^3 log cosh| = 2 sech^2 tanh <= 4 / (3 sqrt 3); the tensor is
  // diagonal so its operator norm is the largest diagonal entry.
  k.certificate = {1.0, 1.0 + epsilon,
                   epsilon * 4.0 / (3.0 * 1.7320508075688772)};

  // Gaussian envelope exp(-p^2/2) * C with C = exp(eps * max(0, -min log cosh))
  // = 1, since log cosh >= 0: accept with probability exp(-eps log cosh(p-b)).
  k.sampler = [dim, epsilon, shift](Rng& rng) -> Vector {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector p(dim);
    for (int i = 0; i < dim; ++i) {
      long attempts = 0;
      for (;;) {
        if (++attempts > kMaxRejectionAttempts)
          throw SamplingError("kin-logcosh rejection sampler exhausted",
                              attempts - 1);
        const double x = normal(rng);
        if (unif(rng) <= std::exp(-epsilon * log_cosh(x - shift))) {
          p[i] = x;
          break;
        }
      }
    }
    return p;
  };

  const auto c = coordinate_moments(
      [=](double x) { return 0.5 * x * x + epsilon * log_cosh(x - shift); },
      [=](double x) { return x + epsilon * std::tanh(x - shift); },
      [=](double x) {
        const double ch = std::cosh(x - shift);
        return 1.0 + epsilon / (ch * ch);
      },
      shift - 40.0, shift + 40.0);
  auto& m = k.moments;
  // Off-diagonal entries vanish: coordinates are independent and E[v'] = 0.
  m.mu = Matrix::Identity(dim, dim) * c.dv_sq;
  m.sigma = Matrix::Identity(dim, dim) * c.d2v;
  m.mean = Vector::Constant(dim, c.mean);
  m.grad_norm_sq_mean = dim * c.dv_sq;
  m.sigma2 = c.m2;
  m.sigma4 = c.m4;
  m.sigma_p = std::sqrt(dim * c.m2);
  if (dim == 1) {
    m.grad_norm_mean = c.abs_dv;
  } else {
    // ||grad V|| does not factor over coordinates; fixed-seed Monte Carlo.
    Rng rng(substream_seed(0x6c6f67636f7368ULL, "grad-norm-mean", dim));
    constexpr int kDraws = 100000;
    double sum = 0.0;
    for (int t = 0; t < kDraws; ++t) sum += k.gradient(k.sampler(rng)).norm();
    m.grad_norm_mean = sum / kDraws;
  }
  return k;
}

PotentialModel make_potential(std::string_view id, const ModelParams& params) {
  if (id == kGaussIso) return gaussian_potential(params.dim);
  if (id == kGaussAniso)
    return anisotropic_gaussian_potential(params.dim, params.kappa);
  if (id == kLogisticRidge)
    return logistic_ridge_potential(params.dim, params.n, params.ridge,
                                    params.feature_scale, params.data_seed);
  throw ConfigError("unknown potential id '" + std::string(id) + "'");
}

KineticModel make_kinetic(std::string_view id, const ModelParams& params) {
  if (id == kKinGauss) return gaussian_kinetic(params.dim);
  if (id == kKinLogcosh)
    return logcosh_kinetic(params.dim, params.epsilon, params.shift);
  throw ConfigError("unknown kinetic id '" + std::string(id) + "'");
}

CertificateReport verify_certificate(const EnergyFunction& fn, int trials,
                                     Rng& rng) {
  require(trials >= 1, "verify_certificate needs trials >= 1");
  fn.certificate.validate();
  // Relative slack for rounding in the difference quotients.
  constexpr double kSlack = 1e-10;
  std::uniform_real_distribution<double> log_radius(-3.0, 1.0);

  CertificateReport report;
  report.trials = trials;
  report.min_convexity_ratio = std::numeric_limits<double>::infinity();
  report.max_lipschitz_ratio = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector x = 3.0 * standard_normal(fn.dim, rng);
    const double r = std::pow(10.0, log_radius(rng));
    const Vector y = x + r * standard_normal(fn.dim, rng);
    const Vector gx = fn.gradient(x);
    const Vector gy = fn.gradient(y);
    const Vector dx = y - x;
    const Vector dg = gy - gx;
    const double dx2 = dx.squaredNorm();
    if (!gx.allFinite() || !gy.allFinite() || dx2 == 0.0) {
      ++report.non_finite;
      ++report.violations;
      if (!report.first_violation) report.first_violation = gx.allFinite() ? y : x;
      continue;
    }
    const double convexity = dg.dot(dx) / dx2;
    const double lipschitz = dg.norm() / std::sqrt(dx2);
    report.min_convexity_ratio = std::min(report.min_convexity_ratio, convexity);
    report.max_lipschitz_ratio = std::max(report.max_lipschitz_ratio, lipschitz);
    const bool bad = convexity < fn.certificate.ell * (1.0 - kSlack) ||
                     lipschitz > fn.certificate.lip * (1.0 + kSlack);
    if (bad) {
      ++report.violations;
      if (!report.first_violation) report.first_violation = x;
    }
  }
  return report;
}

Vector sample_auxiliary(const KineticModel& kinetic, Rng& rng) {
  if (!kinetic.sampler)
    throw ConfigError("kinetic '" + kinetic.id + "' has no sampler");
  return kinetic.sampler(rng);
}

MomentEstimate estimate_moments(const KineticModel& kinetic, int trials,
                                Rng& rng) {
  require(trials >= 1000, "estimate_moments needs trials >= 1000");
  const int d = kinetic.dim;
  // Running first and second moments of every tracked statistic.
  Matrix mu_s = Matrix::Zero(d, d), mu_ss = Matrix::Zero(d, d);
  Matrix sg_s = Matrix::Zero(d, d), sg_ss = Matrix::Zero(d, d);
  Vector p_s = Vector::Zero(d), p_ss = Vector::Zero(d);
  Vector p2_s = Vector::Zero(d), p2_ss = Vector::Zero(d);
  Vector p4_s = Vector::Zero(d), p4_ss = Vector::Zero(d);
  double gn_s = 0, gn_ss = 0, gn2_s = 0, gn2_ss = 0, pn_s = 0, pn_ss = 0;

  for (int t = 0; t < trials; ++t) {
    const Vector p = sample_auxiliary(kinetic, rng);
    const Vector g = kinetic.gradient(p);
    const Matrix h = kinetic.hessian(p);
    const Matrix outer = g * g.transpose();
    mu_s += outer;
    mu_ss += outer.cwiseProduct(outer);
    sg_s += h;
    sg_ss += h.cwiseProduct(h);
    p_s += p;
    p_ss += p.cwiseProduct(p);
    const Vector p2 = p.cwiseProduct(p);
    const Vector p4 = p2.cwiseProduct(p2);
    p2_s += p2;
    p2_ss += p4;
    p4_s += p4;
    p4_ss += p4.cwiseProduct(p4);
    const double gn2 = g.squaredNorm();
    const double gn = std::sqrt(gn2);
    gn_s += gn;
    gn_ss += gn2;
    gn2_s += gn2;
    gn2_ss += gn2 * gn2;
    const double pn2 = p.squaredNorm();
    pn_s += pn2;
    pn_ss += pn2 * pn2;
  }

  const double n = trials;
  auto mean = [n](auto s) { return (s / n).eval(); };
  auto se = [n](auto s, auto ss) {
    auto m = (s / n).eval();
    return ((ss / n - m.cwiseProduct(m)).cwiseMax(0.0) / (n - 1.0))
        .cwiseSqrt()
        .eval();
  };
  auto se_scalar = [n](double s, double ss) {
    const double m = s / n;
    return std::sqrt(std::max(ss / n - m * m, 0.0) / (n - 1.0));
  };

  MomentEstimate est;
  est.trials = trials;
  auto& v = est.value;
  auto& e = est.se;
  v.mu = mean(mu_s);
  e.mu = se(mu_s, mu_ss);
  v.sigma = mean(sg_s);
  e.sigma = se(sg_s, sg_ss);
  v.mean = mean(p_s);
  e.mean = se(p_s, p_ss);
  v.grad_norm_mean = gn_s / n;
  e.grad_norm_mean = se_scalar(gn_s, gn_ss);
  v.grad_norm_sq_mean = gn2_s / n;
  e.grad_norm_sq_mean = se_scalar(gn2_s, gn2_ss);

  const Vector m2 = mean(p2_s), m2_se = se(p2_s, p2_ss);
  const Vector m4 = mean(p4_s), m4_se = se(p4_s, p4_ss);
  Eigen::Index i2 = 0, i4 = 0;
  v.sigma2 = m2.maxCoeff(&i2);
  e.sigma2 = m2_se[i2];
  v.sigma4 = m4.maxCoeff(&i4);
  e.sigma4 = m4_se[i4];
  const double pn_mean = pn_s / n;
  v.sigma_p = std::sqrt(pn_mean);
  e.sigma_p = se_scalar(pn_s, pn_ss) / (2.0 * std::max(v.sigma_p, 1e-300));
  return est;
}

double gradient_consistency_error(const EnergyFunction& fn, int probes,
                                  Rng& rng) {
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    const Vector q = standard_normal(fn.dim, rng);
    const Vector g = fn.gradient(q);
    for (int i = 0; i < fn.dim; ++i) {
      Vector qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const double fd = (fn.energy(qp) - fn.energy(qm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
    }
  }
  return worst;
}

double component_sum_error(const PotentialModel& potential, int probes,
                           Rng& rng) {
  if (!potential.has_components())
    throw ConfigError("potential '" + potential.id + "' has no components");
  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    const Vector q = standard_normal(potential.dim, rng);
    Vector sum = Vector::Zero(potential.dim);
    for (const auto& c : *potential.components) sum += c.gradient(q);
    const Vector g = potential.gradient(q);
    worst = std::max(worst, (sum - g).norm() / (1.0 + g.norm()));
  }
  return worst;
}

}  // namespace adhmc
