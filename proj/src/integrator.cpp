#include "adhmc/integrator.hpp"

#include "adhmc/sampler.hpp"

#include <array>
#include <cmath>

namespace adhmc {

const char* to_string(Direction direction) {
  return direction == Direction::forward ? "forward" : "backward";
}

void LeapfrogConfig::validate() const {
  std::vector<std::string> errors;
  if (!(eta > 0.0) || !std::isfinite(eta))
    errors.emplace_back("leapfrog eta must be > 0");
  if (steps < 1) errors.emplace_back("leapfrog steps must be >= 1");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

Hamiltonian make_hamiltonian(const PotentialModel& potential,
                             const KineticModel& kinetic) {
  return {potential.energy, potential.gradient, kinetic.energy,
          kinetic.gradient};
}

Hamiltonian make_hamiltonian(const RealizedPotential& potential,
                             const KineticModel& kinetic) {
  return {potential.energy, potential.gradient, kinetic.energy,
          kinetic.gradient};
}

namespace {

// One step from (q, p) given grad U at q; leaves grad U at the new q in
// `grad_q` so trajectories evaluate each position once.
PhaseState kick_drift_kick(const PhaseState& state, Vector& grad_q,
                           const std::function<Vector(const Vector&)>& grad_u,
                           const VectorFn& grad_v, double eta,
                           Direction direction) {
  const double s = direction == Direction::forward ? 1.0 : -1.0;
  Vector p_half = state.p - (s * 0.5 * eta) * grad_q;
  if (!p_half.allFinite()) throw IntegrationError(LeapfrogStage::first_half_kick);
  Vector q_next = state.q + (s * eta) * grad_v(p_half);
  if (!q_next.allFinite()) throw IntegrationError(LeapfrogStage::drift);
  grad_q = grad_u(q_next);
  Vector p_next = p_half - (s * 0.5 * eta) * grad_q;
  if (!p_next.allFinite())
    throw IntegrationError(LeapfrogStage::second_half_kick);
  PhaseState out;
  out.q = std::move(q_next);
  out.p = std::move(p_next);
  return out;
}

}  // namespace

PhaseState leapfrog_step(const PhaseState& state, const VectorFn& grad_u,
                         const VectorFn& grad_v, double eta,
                         Direction direction) {
  if (!(eta > 0.0)) throw ConfigError("leapfrog eta must be > 0");
  if (!state.finite()) throw IntegrationError(LeapfrogStage::first_half_kick);
  Vector g = grad_u(state.q);
  return kick_drift_kick(state, g, grad_u, grad_v, eta, direction);
}

std::vector<PhaseState> leapfrog_trajectory(const PhaseState& state,
                                            const GradientOracle& oracle,
                                            const KineticModel& kinetic,
                                            const LeapfrogConfig& config,
                                            Rng& rng) {
  config.validate();
  if (!state.finite()) throw IntegrationError(LeapfrogStage::first_half_kick);
  std::vector<PhaseState> path;
  path.reserve(config.steps + 1);
  path.push_back(state);
  auto draw = [&](const Vector& q) { return oracle.draw(q, rng); };
  Vector g = draw(state.q);
  for (int k = 0; k < config.steps; ++k)
    path.push_back(kick_drift_kick(path.back(), g, draw, kinetic.gradient,
                                   config.eta, config.direction));
  return path;
}

PhaseState reference_flow(const PhaseState& state, const Hamiltonian& h,
                          double t) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw ConfigError("reference_flow needs t >= 0");
  if (t == 0.0) return state;
  constexpr int kSubsteps = 256;
  const double dt = t / kSubsteps;

  // y = (q, p), dq/dt = grad V(p), dp/dt = -grad U(q)
  Vector q = state.q, p = state.p;
  for (int k = 0; k < kSubsteps; ++k) {
    const Vector k1q = h.grad_kinetic(p);
    const Vector k1p = -h.grad_potential(q);
    const Vector k2q = h.grad_kinetic(p + 0.5 * dt * k1p);
    const Vector k2p = -h.grad_potential(q + 0.5 * dt * k1q);
    const Vector k3q = h.grad_kinetic(p + 0.5 * dt * k2p);
    const Vector k3p = -h.grad_potential(q + 0.5 * dt * k2q);
    const Vector k4q = h.grad_kinetic(p + dt * k3p);
    const Vector k4p = -h.grad_potential(q + dt * k3q);
    q += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    p += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  }
  PhaseState out;
  out.q = std::move(q);
  out.p = std::move(p);

  const double h0 = h(state);
  const double drift = std::abs(h(out) - h0);
  const double tolerance = 1e-10 * (1.0 + std::abs(h0));
  if (!(drift <= tolerance)) throw ReferenceFlowError(drift, tolerance);
  return out;
}

PhaseState reference_flow(const PhaseState& state,
                          const PotentialModel& potential,
                          const KineticModel& kinetic, double t) {
  return reference_flow(state, make_hamiltonian(potential, kinetic), t);
}

SlopeFit fit_loglog_slope(const std::vector<double>& etas,
                          const std::vector<double>& errors,
                          const std::vector<double>& ses) {
  if (etas.size() < 3 || errors.size() != etas.size() ||
      ses.size() != etas.size())
    throw ConfigError("slope fit needs at least 3 matching (eta, error) points");
  double sw = 0, swx = 0, swy = 0;
  std::vector<double> x(etas.size()), y(etas.size()), w(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(errors[i] > 0.0)) return {std::nan(""), std::nan("")};
    x[i] = std::log(etas[i]);
    y[i] = std::log(errors[i]);
    const double rel = std::max(ses[i] / errors[i], 1e-12);
    w[i] = 1.0 / (rel * rel);
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  return {sxy / sxx, std::sqrt(1.0 / sxx)};
}

namespace {

struct Moments {
  double sum = 0, sum_sq = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
  }
  double mean(double n) const { return sum / n; }
  double se(double n) const {
    const double m = sum / n;
    return std::sqrt(std::max(sum_sq / n - m * m, 0.0) / (n - 1.0));
  }
};

}  // namespace

ErrorSweepResult one_step_error_sweep(const PotentialModel& potential,
                                      const KineticModel& kinetic,
                                      const std::vector<double>& etas,
                                      int samples, Rng& rng,
                                      const GradientOracle* oracle) {
  std::vector<std::string> errors;
  if (etas.size() < 3) errors.emplace_back("error sweep needs >= 3 eta values");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0 && etas[i] <= 0.5))
      errors.emplace_back("error sweep etas must lie in (0, 0.5]");
    if (i > 0 && !(etas[i] > etas[i - 1]))
      errors.emplace_back("error sweep etas must be strictly increasing");
  }
  if (samples < 1000) errors.emplace_back("error sweep needs samples >= 1000");
  if (!errors.empty()) throw ConfigError(std::move(errors));

  Rng position_rng = fork(rng);
  Rng momentum_rng = fork(rng);
  Rng omega_rng = fork(rng);
  const auto positions =
      stationary_positions(potential, samples, position_rng);

  const std::size_t m = etas.size();
  std::vector<Moments> q2(m), p2(m), dh(m), uv(m);
  for (int s = 0; s < samples; ++s) {
    PhaseState start;
    start.q = positions[s];
    start.p = sample_auxiliary(kinetic, momentum_rng);
    const RealizedPotential realized =
        oracle ? oracle->realize(omega_rng)
               : RealizedPotential{potential.energy, potential.gradient, {}};
    const Hamiltonian h = make_hamiltonian(realized, kinetic);
    const double h0 = h(start);
    for (std::size_t i = 0; i < m; ++i) {
      const PhaseState lf = leapfrog_step(start, realized.gradient,
                                          kinetic.gradient, etas[i],
                                          Direction::forward);
      const PhaseState exact = reference_flow(start, h, etas[i]);
      q2[i].add((lf.q - exact.q).squaredNorm());
      p2[i].add((lf.p - exact.p).squaredNorm());
      dh[i].add(std::abs(h(lf) - h0));
      uv[i].add(std::abs(h.potential(lf.q) - h.potential(exact.q)) +
                std::abs(h.kinetic(lf.p) - h.kinetic(exact.p)));
    }
  }

  ErrorSweepResult r;
  r.etas = etas;
  r.samples = samples;
  const double n = samples;
  auto rms = [n](const Moments& mo, std::vector<double>& val,
                 std::vector<double>& se) {
    const double mean_sq = mo.mean(n);
    const double root = std::sqrt(mean_sq);
    val.push_back(root);
    se.push_back(root > 0.0 ? mo.se(n) / (2.0 * root) : 0.0);
  };
  for (std::size_t i = 0; i < m; ++i) {
    rms(q2[i], r.q_errors, r.q_ses);
    rms(p2[i], r.p_errors, r.p_ses);
    r.h_errors.push_back(dh[i].mean(n));
    r.h_ses.push_back(dh[i].se(n));
    r.uv_errors.push_back(uv[i].mean(n));
    r.uv_ses.push_back(uv[i].se(n));
  }
  r.q_slope = fit_loglog_slope(etas, r.q_errors, r.q_ses);
  r.p_slope = fit_loglog_slope(etas, r.p_errors, r.p_ses);
  r.h_slope = fit_loglog_slope(etas, r.h_errors, r.h_ses);
  r.uv_slope = fit_loglog_slope(etas, r.uv_errors, r.uv_ses);
  return r;
}

double quadrature_identity_residual(const std::function<double(double)>& f,
                                    const std::function<double(double)>& df,
                                    double eta, int grid) {
  if (!(eta > 0.0) || grid < 1)
    throw ConfigError("quadrature identity needs eta > 0 and grid >= 1");
  // 5-point Gauss-Legendre on [-1, 1].
  static constexpr std::array<double, 5> node{
      0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
      0.9061798459386640};
  static constexpr std::array<double, 5> weight{
      0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
      0.2369268850561891, 0.2369268850561891};
  auto integrate = [&](const auto& g, double a, double b) {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double s = 0.0;
    for (int j = 0; j < 5; ++j) s += weight[j] * g(mid + half * node[j]);
    return half * s;
  };

  const double width = eta / grid;
  double cumulative = 0.0;  // int_0^{a_k} f
  double outer = 0.0;       // int_0^eta int_0^t f ds dt
  double rhs = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double a = k * width;
    const double b = (k + 1 == grid) ? eta : a + width;
    outer += integrate(
        [&](double t) { return cumulative + integrate(f, a, t); }, a, b);
    rhs += integrate(
        [&](double tau) { return 0.5 * tau * (tau - eta) * df(tau); }, a, b);
    cumulative += integrate(f, a, b);
  }
  const double lhs = outer - 0.5 * eta * cumulative;
  return std::abs(lhs - rhs);
}

}  // namespace adhmc
