#pragma once

#include "adhmc/integrator.hpp"
#include "adhmc/model.hpp"
#include "adhmc/oracle.hpp"
#include "adhmc/sampler.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace adhmc {

// --- moment bounds ---------------------------------------------------------

struct MomentBoundSide {
  double estimate = 0.0;  // [E ||grad W||^{2p}]^{1/p}
  double se = 0.0;
  double bound = 0.0;     // (d + 2p - 2) L_W
  bool passed = false;    // estimate <= bound + 4 se
};

struct GradientMomentReport {
  int p_order = 1;
  MomentBoundSide potential;
  MomentBoundSide kinetic;
  bool passed() const { return potential.passed && kinetic.passed; }
};

/// Monte Carlo check of [E ||grad U||^{2p}]^{1/p} <= (d+2p-2) L_U under
/// exp(-U), and the same for V under g.
GradientMomentReport gradient_moment_check(const PotentialModel& potential,
                                           const KineticModel& kinetic,
                                           int p_order, int draws, Rng& rng);

struct QuadraticFormReport {
  bool precondition_ok = false;  // zero mean, diagonal second moments
  std::string precondition_note;
  double estimate = 0.0;         // E[(p^T grad^2 U(q) p)^2]
  double se = 0.0;
  double bound = 0.0;            // (Sigma2 + Sigma4) d L_U^2
  bool passed = false;
};

QuadraticFormReport quadratic_form_moment_check(const PotentialModel& potential,
                                                const KineticModel& kinetic,
                                                int draws, Rng& rng);

// --- bound constants -------------------------------------------------------

struct BoundInputs {
  int d = 1;
  SmoothnessCertificate potential;
  SmoothnessCertificate kinetic;
  double sigma_q = 0.0;
  double sigma_p = 0.0;
  LipschitzMoments oracle;  // E[(L^omega)^k]
  double third_bar = 0.0;   // T-bar
};

struct BoundConstants {
  double a3 = 0.0;
  double a3_sg = 0.0;
  BoundInputs inputs;
};

/// Closed-form acceptance constants: A3 for exact gradients, A3^SG for a
/// stochastic oracle.
BoundConstants acceptance_bound_constants(const BoundInputs& inputs);

/// Inputs for a model pair: sigma_q from the potential (or a Monte Carlo
/// estimate with `rng`), sigma_p from the kinetic moments.
BoundInputs bound_inputs(const PotentialModel& potential,
                         const KineticModel& kinetic,
                         const GradientOracle& oracle, Rng& rng);

/// Leading eta^3 coefficients of the one-step position and momentum errors.
struct LeapfrogErrorCoefficients {
  double position = 0.0;
  double momentum = 0.0;
};
LeapfrogErrorCoefficients leapfrog_error_coefficients(const BoundInputs& in);
/// Stochastic-gradient version: L_U powers replaced by oracle moments.
LeapfrogErrorCoefficients leapfrog_error_coefficients_sg(const BoundInputs& in);

struct EnergyBoundReport {
  ErrorSweepResult sweep;
  BoundConstants constants;
  double constant_used = 0.0;  // A3 or A3^SG
  std::vector<double> bounds;  // constant_used * eta^3
  bool slope_ok = false;       // uv slope >= 2.7
  bool bound_ok = false;       // measured <= bound + 4 se at every eta
  bool passed() const { return slope_ok && bound_ok; }
};

/// Measures E|U(q_hat) - U(Q)| + E|V(p_hat) - V(P)| per eta against A3 eta^3
/// (A3^SG eta^3 for a stochastic oracle).
EnergyBoundReport energy_error_bound_check(const PotentialModel& potential,
                                           const KineticModel& kinetic,
                                           const GradientOracle& oracle,
                                           const std::vector<double>& etas,
                                           int samples, Rng& rng);

/// eta = ((1 - rho) delta / (K A3))^{1/3}: by Markov, E[1 - A] <= K A3 eta^3
/// keeps P[A < rho] <= delta.
double step_size_advisor(const BoundConstants& bounds, int steps, double rho,
                         double delta);

// --- Dirichlet form --------------------------------------------------------

struct DirichletEstimate {
  double form_value = 0.0;  // mean of (h(x_t) - h(x_{t+1}))^2
  double variance = 0.0;    // mean of (h(x_i) - h(x_{i+N/2}))^2
  std::optional<double> ratio;
  double form_se = 0.0;
  double variance_se = 0.0;
  double ratio_se = 0.0;
  double lag1_autocorrelation = 0.0;
  double autocorr_time = 0.0;
  int transitions = 0;
};

using TestFunction = std::function<double(const Vector&)>;

/// Both terms use the unnormalized double integrals, so the ratio is the
/// spectral-gap witness E(h,h)/Var(h) = 1 - lag-1 autocorrelation.
DirichletEstimate dirichlet_form_estimate(const ChainRecord& chain,
                                          const TestFunction& h, int burn_in);

// --- TV decay --------------------------------------------------------------

struct TvDecayReport {
  std::vector<double> tv;      // d_TV at t = 0..horizon
  double noise_floor = 0.0;
  int fit_first = 0, fit_last = 0;
  double contraction = 0.0;    // c_emp
  double contraction_se = 0.0;
  double sigma_v_sq = 0.0;     // reading in force
  double sigma_v_sq_alt = 0.0; // the other reading
  SigmaVReading reading = SigmaVReading::squared;
  double theoretical = 0.0;      // 1 - K eta^3 sigma_V^2 / 4
  double theoretical_alt = 0.0;
  bool passed = false;           // c_emp <= theoretical + 2 se
  bool passed_alt = false;
  std::string note;
};

struct TvDecayOptions {
  int n_chains = 10000;
  int horizon = 20;
  int reference_draws = 1000000;
  int bins = 50;
  double offset = 2.5;  // initial law N(offset, I) per coordinate
  bool start_at_target = false;
  SigmaVReading reading = SigmaVReading::squared;
};

/// Runs n_chains from the offset initial law and tracks the histogram TV
/// distance of the first coordinate against exact reference draws.
TvDecayReport tv_decay_estimate(const PotentialModel& potential,
                                const KineticModel& kinetic,
                                const GradientOracle& oracle,
                                const SamplerConfig& config,
                                const TvDecayOptions& options, Rng& rng);

// --- pushforward KL --------------------------------------------------------

struct KlEstimate {
  double kl = 0.0;
  double kl_se = 0.0;
  double jacobian_term = 0.0;  // E |log det(dp~/dp)|
  double jacobian_se = 0.0;
  double continuity_bound = 0.0;  // eta T_V L_U / 2 * |q1 - q2|
  int failures = 0;
  int samples = 0;
};

/// One-step KL(P_q1 || P_q2) between the leapfrog images of q1 and q2:
/// E_p[V(p~) - V(p) - log det(dp~/dp)], p~ solving
/// q2 + eta gV(p~ - eta/2 gU(q2)) = Q(q1, p) by damped Newton.
KlEstimate kl_pushforward_estimate(const Vector& q1, const Vector& q2,
                                   const PotentialModel& potential,
                                   const KineticModel& kinetic, double eta,
                                   int samples, Rng& rng);

}  // namespace adhmc
