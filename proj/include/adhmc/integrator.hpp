#pragma once

#include "adhmc/model.hpp"
#include "adhmc/oracle.hpp"

#include <functional>
#include <vector>

namespace adhmc {

enum class Direction { forward, backward };

const char* to_string(Direction direction);

struct LeapfrogConfig {
  double eta = 0.1;
  int steps = 10;
  Direction direction = Direction::forward;

  void validate() const;
};

/// H(q, p) = U(q) + V(p) with gradients; U may be a frozen oracle
/// realization.
struct Hamiltonian {
  ScalarFn potential;
  VectorFn grad_potential;
  ScalarFn kinetic;
  VectorFn grad_kinetic;

  double operator()(const PhaseState& s) const {
    return potential(s.q) + kinetic(s.p);
  }
};

Hamiltonian make_hamiltonian(const PotentialModel& potential,
                             const KineticModel& kinetic);
Hamiltonian make_hamiltonian(const RealizedPotential& potential,
                             const KineticModel& kinetic);

/// One leapfrog step. Forward:
///   p' = p - eta/2 gU(q);  q'' = q + eta gV(p');  p'' = p' - eta/2 gU(q'')
/// Backward flips every sign and is the exact inverse of forward.
PhaseState leapfrog_step(const PhaseState& state, const VectorFn& grad_u,
                         const VectorFn& grad_v, double eta,
                         Direction direction);

/// K steps with one oracle draw per distinct position; the draw at q_{k+1}
/// serves both the closing half kick of step k and the opening one of k+1.
std::vector<PhaseState> leapfrog_trajectory(const PhaseState& state,
                                            const GradientOracle& oracle,
                                            const KineticModel& kinetic,
                                            const LeapfrogConfig& config,
                                            Rng& rng);

/// Classical RK4 with at least 256 substeps, gated on energy drift
/// |dH| <= 1e-10 (1 + |H|). Throws ReferenceFlowError past the gate.
PhaseState reference_flow(const PhaseState& state, const Hamiltonian& h,
                          double t);
PhaseState reference_flow(const PhaseState& state,
                          const PotentialModel& potential,
                          const KineticModel& kinetic, double t);

struct SlopeFit {
  double slope = 0.0;
  double se = 0.0;
};

/// Weighted least squares of log(error) on log(eta); weights are the inverse
/// variances (se/error)^2 of the log errors.
SlopeFit fit_loglog_slope(const std::vector<double>& etas,
                          const std::vector<double>& errors,
                          const std::vector<double>& ses);

struct ErrorSweepResult {
  std::vector<double> etas;
  std::vector<double> q_errors, q_ses;    // |||Q(eta) - q_hat|||_2
  std::vector<double> p_errors, p_ses;    // |||P(eta) - p_hat|||_2
  std::vector<double> h_errors, h_ses;    // E|H(leapfrog) - H(start)|
  std::vector<double> uv_errors, uv_ses;  // E|dU| + E|dV| vs exact flow
  SlopeFit q_slope, p_slope, h_slope, uv_slope;
  int samples = 0;
};

/// One-step leapfrog vs reference flow over an eta grid. Phase points are
/// drawn once from pi x g and reused at every eta. With a stochastic oracle,
/// one realization U^omega is drawn per phase point and frozen for the step;
/// the reference is the exact flow of that U^omega.
ErrorSweepResult one_step_error_sweep(const PotentialModel& potential,
                                      const KineticModel& kinetic,
                                      const std::vector<double>& etas,
                                      int samples, Rng& rng,
                                      const GradientOracle* oracle = nullptr);

/// Absolute difference of the two sides of
///   int_0^eta int_0^t f - 1/2 int_0^eta int_0^eta f
///     = int_0^eta tau/2 (tau - eta) f'(tau) dtau
/// by 5-point Gauss-Legendre on `grid` panels.
double quadrature_identity_residual(const std::function<double(double)>& f,
                                    const std::function<double(double)>& df,
                                    double eta, int grid);

}  // namespace adhmc
