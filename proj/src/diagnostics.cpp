#include "adhmc/diagnostics.hpp"

#include "adhmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adhmc {

namespace {

struct Accumulator {
  double sum = 0.0, sum_sq = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double se() const {
    const double m = mean();
    const double var = std::max(sum_sq / n - m * m, 0.0) * n / (n - 1.0);
    return std::sqrt(var / n);
  }
};

MomentBoundSide power_mean_side(const Accumulator& acc, int p_order,
                                double bound) {
  MomentBoundSide side;
  const double m = acc.mean();
  const double inv = 1.0 / p_order;
  side.estimate = std::pow(m, inv);
  side.se = m > 0.0 ? inv * std::pow(m, inv - 1.0) * acc.se() : 0.0;
  side.bound = bound;
  side.passed = side.estimate <= bound + 4.0 * side.se;
  return side;
}

double sqrt3(double x) { return x * std::sqrt(x); }  // x^{3/2}

}  // namespace

GradientMomentReport gradient_moment_check(const PotentialModel& potential,
                                           const KineticModel& kinetic,
                                           int p_order, int draws, Rng& rng) {
  if (p_order < 1) throw ConfigError("gradient_moment_check needs p >= 1");
  if (draws < 100) throw ConfigError("gradient_moment_check needs draws >= 100");
  const auto positions = stationary_positions(potential, draws, rng, 100000, 10);
  Accumulator u, v;
  for (const auto& q : positions)
    u.add(std::pow(potential.gradient(q).squaredNorm(), p_order));
  for (int i = 0; i < draws; ++i)
    v.add(std::pow(kinetic.gradient(sample_auxiliary(kinetic, rng)).squaredNorm(),
                   p_order));
  GradientMomentReport report;
  report.p_order = p_order;
  const double factor = potential.dim + 2.0 * p_order - 2.0;
  report.potential = power_mean_side(u, p_order, factor * potential.certificate.lip);
  report.kinetic = power_mean_side(v, p_order, factor * kinetic.certificate.lip);
  return report;
}

QuadraticFormReport quadratic_form_moment_check(const PotentialModel& potential,
                                                const KineticModel& kinetic,
                                                int draws, Rng& rng) {
  if (draws < 100) throw ConfigError("quadratic_form_moment_check needs draws >= 100");
  QuadraticFormReport report;
  const auto& m = kinetic.moments;
  const double mean_tol = 1e-10;
  const bool zero_mean = m.mean.size() == kinetic.dim &&
                         m.mean.cwiseAbs().maxCoeff() <= mean_tol;
  Matrix off = m.mu;
  off.diagonal().setZero();
  const bool diagonal = off.size() == 0 || off.cwiseAbs().maxCoeff() <= mean_tol;
  report.precondition_ok = zero_mean && diagonal;
  if (!zero_mean)
    report.precondition_note = "kinetic '" + kinetic.id +
                               "' has nonzero mean; center it before this check";
  else if (!diagonal)
    report.precondition_note = "kinetic second moments are not diagonal";
  report.bound =
      (m.sigma2 + m.sigma4) * potential.dim * potential.certificate.lip *
      potential.certificate.lip;
  if (!report.precondition_ok) return report;

  const auto positions = stationary_positions(potential, draws, rng, 100000, 10);
  Accumulator acc;
  for (const auto& q : positions) {
    const Vector p = sample_auxiliary(kinetic, rng);
    const double form = p.dot(potential.hessian(q) * p);
    acc.add(form * form);
  }
  report.estimate = acc.mean();
  report.se = acc.se();
  report.passed = report.estimate <= report.bound + 4.0 * report.se;
  return report;
}

BoundConstants acceptance_bound_constants(const BoundInputs& in) {
  std::vector<std::string> errors;
  if (in.d < 1) errors.emplace_back("bound constants need d >= 1");
  if (!(in.sigma_q >= 0.0) || !(in.sigma_p >= 0.0))
    errors.emplace_back("bound constants need sigma_q, sigma_p >= 0");
  if (!(in.potential.lip > 0.0) || !(in.kinetic.lip > 0.0))
    errors.emplace_back("bound constants need positive Lipschitz constants");
  if (!errors.empty()) throw ConfigError(std::move(errors));

  const double d = in.d;
  const double lu = in.potential.lip, lv = in.kinetic.lip;
  const double tu = in.potential.third, tv = in.kinetic.third;
  const double sq = in.sigma_q, sp = in.sigma_p;
  const double dlu = std::sqrt(d * lu);
  const double d2 = d + 2.0;

  BoundConstants out;
  out.inputs = in;
  out.a3 =
      (lu * sq + dlu) *
          (d2 * tv * lu / 24.0 + lv * lu * std::sqrt(d2 * lv) / 6.0) +
      (lv * sp + dlu) * std::sqrt(lv * d2) *
          ((tu * sqrt3(lu) * std::sqrt(d2) + sqrt3(lu) * std::sqrt(lv)) / 6.0 +
           tu / 12.0 + sqrt3(lu) * std::sqrt(lv) / 4.0);

  const double e_half = in.oracle.half;
  const double e_32 = in.oracle.three_half;
  const double e_2 = in.oracle.square;
  const double tb = in.third_bar;
  const double mixed = e_2 + std::sqrt(d) * e_32;
  out.a3_sg =
      (d2 * tv * mixed / 24.0 + lv * mixed * std::sqrt(d2 * lv) / 6.0) +
      lv * sp * std::sqrt(lv * d2) *
          ((tb * e_32 * std::sqrt(d2) + e_32 * std::sqrt(lv)) / 6.0 +
           tb / 12.0 + e_32 * std::sqrt(lv) / 4.0) +
      std::sqrt(d) * ((tb * e_2 * std::sqrt(d2) + e_2 * std::sqrt(lv)) / 6.0 +
                      tb * e_half / 12.0 + e_2 * std::sqrt(lv) / 4.0);
  return out;
}

BoundInputs bound_inputs(const PotentialModel& potential,
                         const KineticModel& kinetic,
                         const GradientOracle& oracle, Rng& rng) {
  BoundInputs in;
  in.d = potential.dim;
  in.potential = potential.certificate;
  in.kinetic = kinetic.certificate;
  if (potential.sigma_q) {
    in.sigma_q = *potential.sigma_q;
  } else {
    constexpr int kDraws = 100000;
    double sum = 0.0;
    for (const auto& q : stationary_positions(potential, kDraws, rng, 100000, 1))
      sum += q.squaredNorm();
    in.sigma_q = std::sqrt(sum / kDraws);
  }
  in.sigma_p = kinetic.moments.sigma_p;
  in.oracle = oracle.moments();
  in.third_bar = oracle.bounds().third_bar;
  return in;
}

LeapfrogErrorCoefficients leapfrog_error_coefficients(const BoundInputs& in) {
  const double d2 = in.d + 2.0;
  const double lu = in.potential.lip, lv = in.kinetic.lip;
  const double tu = in.potential.third, tv = in.kinetic.third;
  LeapfrogErrorCoefficients c;
  c.position = tv * d2 * lu / 24.0 + lv * lu * std::sqrt(d2 * lv) / 6.0;
  c.momentum = std::sqrt(lv * d2) *
               ((tu * sqrt3(lu) * std::sqrt(d2) + sqrt3(lu) * std::sqrt(lv)) / 6.0 +
                tu / 12.0 + sqrt3(lu) * std::sqrt(lv) / 4.0);
  return c;
}

LeapfrogErrorCoefficients leapfrog_error_coefficients_sg(const BoundInputs& in) {
  const double d2 = in.d + 2.0;
  const double lv = in.kinetic.lip, tv = in.kinetic.third;
  const double e1 = in.oracle.mean, e32 = in.oracle.three_half;
  const double tb = in.third_bar;
  LeapfrogErrorCoefficients c;
  c.position = tv * d2 * e1 / 24.0 + lv * e1 * std::sqrt(d2 * lv) / 6.0;
  c.momentum = std::sqrt(lv * d2) *
               ((tb * e32 * std::sqrt(d2) + e32 * std::sqrt(lv)) / 6.0 +
                tb / 12.0 + e32 * std::sqrt(lv) / 4.0);
  return c;
}

EnergyBoundReport energy_error_bound_check(const PotentialModel& potential,
                                           const KineticModel& kinetic,
                                           const GradientOracle& oracle,
                                           const std::vector<double>& etas,
                                           int samples, Rng& rng) {
  const bool stochastic = oracle.kind() != OracleKind::exact;
  Rng bound_rng = fork(rng);
  EnergyBoundReport report;
  report.sweep = one_step_error_sweep(potential, kinetic, etas, samples, rng,
                                      stochastic ? &oracle : nullptr);
  report.constants =
      acceptance_bound_constants(bound_inputs(potential, kinetic, oracle, bound_rng));
  report.constant_used = stochastic ? report.constants.a3_sg : report.constants.a3;
  report.bound_ok = true;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double b = report.constant_used * etas[i] * etas[i] * etas[i];
    report.bounds.push_back(b);
    if (report.sweep.uv_errors[i] > b + 4.0 * report.sweep.uv_ses[i])
      report.bound_ok = false;
  }
  report.slope_ok = report.sweep.uv_slope.slope >= 2.7;
  return report;
}

double step_size_advisor(const BoundConstants& bounds, int steps, double rho,
                         double delta) {
  std::vector<std::string> errors;
  if (!(bounds.a3 > 0.0) || !std::isfinite(bounds.a3))
    errors.emplace_back("step size advisor needs a finite A3 > 0");
  if (steps < 1) errors.emplace_back("step size advisor needs K >= 1");
  if (!(rho > 0.0 && rho < 1.0)) errors.emplace_back("rho must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) errors.emplace_back("delta must lie in (0, 1)");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return std::cbrt((1.0 - rho) * delta / (steps * bounds.a3));
}

DirichletEstimate dirichlet_form_estimate(const ChainRecord& chain,
                                          const TestFunction& h, int burn_in) {
  if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
  const int total = static_cast<int>(chain.positions.size());
  if (total - burn_in < 4)
    throw ConfigError("dirichlet_form_estimate needs at least 4 post-burn-in states");
  std::vector<double> values;
  values.reserve(total - burn_in);
  for (int t = burn_in; t < total; ++t) values.push_back(h(chain.positions[t]));

  const std::size_t n = values.size();
  std::vector<double> jumps(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const double diff = values[t] - values[t + 1];
    jumps[t] = diff * diff;
  }
  const std::size_t half = n / 2;
  std::vector<double> pairs(half);
  for (std::size_t i = 0; i < half; ++i) {
    const double diff = values[i] - values[i + half];
    pairs[i] = diff * diff;
  }

  DirichletEstimate est;
  est.transitions = static_cast<int>(jumps.size());
  est.form_value = stats::mean(jumps);
  est.variance = stats::mean(pairs);
  est.form_se = stats::batch_means_se(jumps);
  est.variance_se = stats::batch_means_se(pairs);
  est.lag1_autocorrelation = stats::lag1_autocorrelation(values);
  est.autocorr_time = stats::integrated_autocorr_time(values);
  if (est.variance > 0.0 && est.variance > 2.0 * est.variance_se) {
    const double r = est.form_value / est.variance;
    est.ratio = r;
    const double rf = est.form_value > 0.0 ? est.form_se / est.form_value : 0.0;
    const double rv = est.variance_se / est.variance;
    est.ratio_se = r * std::sqrt(rf * rf + rv * rv);
  }
  return est;
}

namespace {

struct Histogram {
  std::vector<double> edges;  // interior edges, size bins - 1
  std::vector<double> reference;

  int bin(double x) const {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) -
                            edges.begin());
  }
  double tv(const std::vector<double>& sample) const {
    std::vector<double> freq(reference.size(), 0.0);
    for (double x : sample) freq[bin(x)] += 1.0;
    double total = 0.0;
    for (std::size_t b = 0; b < freq.size(); ++b)
      total += std::abs(freq[b] / sample.size() - reference[b]);
    return 0.5 * total;
  }
};

}  // namespace

TvDecayReport tv_decay_estimate(const PotentialModel& potential,
                                const KineticModel& kinetic,
                                const GradientOracle& oracle,
                                const SamplerConfig& config,
                                const TvDecayOptions& options, Rng& rng) {
  std::vector<std::string> errors;
  if (!potential.exact_sampler)
    errors.emplace_back("tv_decay_estimate needs an exact reference sampler");
  if (potential.dim > 2) errors.emplace_back("tv_decay_estimate needs d <= 2");
  if (options.n_chains < 100) errors.emplace_back("n_chains must be >= 100");
  if (options.horizon < 3) errors.emplace_back("horizon must be >= 3");
  if (options.bins < 2) errors.emplace_back("bins must be >= 2");
  if (options.reference_draws < 4 * options.bins)
    errors.emplace_back("too few reference draws for the binning");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  config.validate();

  Rng reference_rng = fork(rng);
  Rng chain_rng = fork(rng);
  Rng bootstrap_rng = fork(rng);

  // First half of the reference draws fixes equal-probability bins and their
  // probabilities; the second half feeds the noise-floor bootstrap.
  std::vector<double> first, second;
  for (int i = 0; i < options.reference_draws; ++i) {
    const double x = potential.exact_sampler(reference_rng)[0];
    (i % 2 == 0 ? first : second).push_back(x);
  }
  std::vector<double> sorted = first;
  std::sort(sorted.begin(), sorted.end());
  Histogram hist;
  for (int b = 1; b < options.bins; ++b)
    hist.edges.push_back(sorted[b * sorted.size() / options.bins]);
  hist.reference.assign(options.bins, 0.0);
  for (double x : first) hist.reference[hist.bin(x)] += 1.0;
  for (double& r : hist.reference) r /= first.size();

  TvDecayReport report;
  {
    constexpr int kReps = 20;
    std::uniform_int_distribution<std::size_t> pick(0, second.size() - 1);
    std::vector<double> resample(options.n_chains);
    double total = 0.0;
    for (int rep = 0; rep < kReps; ++rep) {
      for (auto& x : resample) x = second[pick(bootstrap_rng)];
      total += hist.tv(resample);
    }
    report.noise_floor = total / kReps;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> states(options.n_chains);
  for (auto& q : states) {
    if (options.start_at_target) {
      q = potential.exact_sampler(chain_rng);
    } else {
      q.resize(potential.dim);
      for (int i = 0; i < potential.dim; ++i) q[i] = options.offset + normal(chain_rng);
    }
  }
  std::vector<double> firsts(options.n_chains);
  auto record = [&] {
    for (int c = 0; c < options.n_chains; ++c) firsts[c] = states[c][0];
    report.tv.push_back(hist.tv(firsts));
  };
  record();
  for (int t = 1; t <= options.horizon; ++t) {
    for (auto& q : states)
      q = sampler_step(q, potential, kinetic, oracle, config, chain_rng).q;
    record();
  }

  const auto& m = kinetic.moments;
  const double k_eta3 = config.leapfrog.steps * std::pow(config.leapfrog.eta, 3);
  report.reading = options.reading;
  report.sigma_v_sq = m.sigma_v_sq(options.reading);
  const SigmaVReading other = options.reading == SigmaVReading::squared
                                  ? SigmaVReading::first_power
                                  : SigmaVReading::squared;
  report.sigma_v_sq_alt = m.sigma_v_sq(other);
  report.theoretical = 1.0 - k_eta3 * report.sigma_v_sq / 4.0;
  report.theoretical_alt = 1.0 - k_eta3 * report.sigma_v_sq_alt / 4.0;

  // Linear regime: the leading run of points clearly above the noise floor.
  const double threshold = 3.0 * report.noise_floor;
  int last = -1;
  while (last + 1 < static_cast<int>(report.tv.size()) &&
         report.tv[last + 1] > threshold)
    ++last;
  if (last + 1 < 3) {
    report.note =
        "fewer than 3 TV points above the noise floor; use more chains or a "
        "larger initial offset";
    return report;
  }
  std::vector<double> ts, logs;
  for (int t = 0; t <= last; ++t) {
    ts.push_back(t);
    logs.push_back(std::log(report.tv[t]));
  }
  const auto fit = stats::linear_fit(ts, logs);
  report.fit_first = 0;
  report.fit_last = last;
  report.contraction = std::exp(fit.slope);
  report.contraction_se = report.contraction * fit.slope_se;
  report.passed =
      report.contraction <= report.theoretical + 2.0 * report.contraction_se;
  report.passed_alt =
      report.contraction <= report.theoretical_alt + 2.0 * report.contraction_se;
  return report;
}

KlEstimate kl_pushforward_estimate(const Vector& q1, const Vector& q2,
                                   const PotentialModel& potential,
                                   const KineticModel& kinetic, double eta,
                                   int samples, Rng& rng) {
  if (!(eta > 0.0)) throw ConfigError("kl estimate needs eta > 0");
  if (samples < 2) throw ConfigError("kl estimate needs samples >= 2");
  if (q1.size() != potential.dim || q2.size() != potential.dim)
    throw ConfigError("kl estimate positions must have length d");

  const Vector kick1 = 0.5 * eta * potential.gradient(q1);
  const Vector kick2 = 0.5 * eta * potential.gradient(q2);
  auto log_det = [](const Matrix& spd) {
    const Eigen::LLT<Matrix> llt(spd);
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };

  Accumulator kl, jac;
  KlEstimate out;
  out.samples = samples;
  for (int s = 0; s < samples; ++s) {
    const Vector p = sample_auxiliary(kinetic, rng);
    const Vector a1 = p - kick1;
    const Vector image = q1 + eta * kinetic.gradient(a1);
    auto residual = [&](const Vector& pt) -> Vector {
      return q2 + eta * kinetic.gradient(pt - kick2) - image;
    };
    const double tol = 1e-12 * std::max(1.0, image.norm());
    Vector pt = p;
    Vector r = residual(pt);
    bool converged = r.norm() <= tol;
    for (int it = 0; it < 100 && !converged; ++it) {
      const Matrix jacobian = eta * kinetic.hessian(pt - kick2);
      const Vector step = jacobian.ldlt().solve(r);
      double damping = 1.0;
      Vector trial = pt - step;
      Vector trial_r = residual(trial);
      for (int halve = 0; halve < 30 && trial_r.norm() >= r.norm(); ++halve) {
        damping *= 0.5;
        trial = pt - damping * step;
        trial_r = residual(trial);
      }
      if (trial_r.norm() >= r.norm()) break;
      pt = std::move(trial);
      r = std::move(trial_r);
      converged = r.norm() <= tol;
    }
    if (!converged) {
      ++out.failures;
      continue;
    }
    const double ld = log_det(kinetic.hessian(a1)) - log_det(kinetic.hessian(pt - kick2));
    kl.add(kinetic.energy(pt) - kinetic.energy(p) - ld);
    jac.add(std::abs(ld));
  }
  if (out.failures > 0.001 * samples)
    throw std::runtime_error("kl estimate: Newton failed on " +
                             std::to_string(out.failures) + " of " +
                             std::to_string(samples) + " samples");
  out.kl = kl.mean();
  out.kl_se = kl.se();
  out.jacobian_term = jac.mean();
  out.jacobian_se = jac.se();
  out.continuity_bound = 0.5 * eta * kinetic.certificate.third *
                         potential.certificate.lip * (q1 - q2).norm();
  return out;
}

}  // namespace adhmc
