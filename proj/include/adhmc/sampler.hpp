#pragma once

#include "adhmc/integrator.hpp"
#include "adhmc/model.hpp"
#include "adhmc/oracle.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace adhmc {

enum class Algorithm { sghmc, adhmc };

const char* to_string(Algorithm algorithm);

struct OracleSpec {
  OracleKind kind = OracleKind::exact;
  int batch = 0;
};

struct SamplerConfig {
  LeapfrogConfig leapfrog;
  OracleSpec oracle;
  Algorithm algorithm = Algorithm::sghmc;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepRecord {
  bool accepted = false;
  double log_ratio = 0.0;   // log of the MH acceptance probability, <= 0
  double energy_gap = 0.0;  // proposal energy minus start energy
  bool flagged = false;     // integration failure or non-finite energy
};

struct ChainRecord {
  std::vector<Vector> positions;
  std::vector<bool> accept_flags;
  std::vector<double> log_ratios;
  std::vector<double> energy_gaps;
  std::vector<bool> flagged;
  SamplerConfig config;
  std::uint64_t seed_trace = 0;  // seed of the stream that drove the chain

  std::size_t steps() const { return accept_flags.size(); }
  double acceptance_rate() const;
};

/// log A = min{0, H(start) - H(end)}; -inf for a non-finite end energy.
double acceptance_log_ratio_hmc(const PhaseState& start, const PhaseState& end,
                                const PotentialModel& potential,
                                const KineticModel& kinetic);

struct StepResult {
  Vector q;
  StepRecord record;
};

/// Lift, K forward leapfrog steps, accept q_K with probability
/// min{1, f(q_K) g(p_K) / (f(q_0) g(p_0))}.
StepResult sghmc_step(const Vector& q, const PotentialModel& potential,
                      const KineticModel& kinetic, const GradientOracle& oracle,
                      const SamplerConfig& config, Rng& rng);

/// Forward leg (q0,p0)->(qK,pK), fresh p'0, backward leg (qK,p'0)->(q'K,p'K);
/// accept q'K with probability
/// min{1, f(q'K) g(pK) g(p'K) / (f(q0) g(p0) g(p'0))}.
StepResult adhmc_step(const Vector& q, const PotentialModel& potential,
                      const KineticModel& kinetic, const GradientOracle& oracle,
                      const SamplerConfig& config, Rng& rng);

StepResult sampler_step(const Vector& q, const PotentialModel& potential,
                        const KineticModel& kinetic,
                        const GradientOracle& oracle,
                        const SamplerConfig& config, Rng& rng);

ChainRecord run_chain(const Vector& q0, const PotentialModel& potential,
                      const KineticModel& kinetic, const GradientOracle& oracle,
                      const SamplerConfig& config, int n_steps, Rng& rng);

/// Draws from exp(-U): the exact sampler when there is one, else a thinned
/// exact-gradient HMC chain after `warmup` steps.
/// The warmup chain uses a Gaussian kinetic, whose HMC kernel is exactly
/// pi-invariant.
std::vector<Vector> stationary_positions(const PotentialModel& potential,
                                         int count, Rng& rng,
                                         int warmup = 100000, int thin = 5);

/// Leapfrog step for the Gaussian-kinetic warmup chain: 0.3 / sqrt(L_U).
double warmup_step_size(const PotentialModel& potential);

struct ReversibilityReport {
  int bins = 0;
  int pairs_used = 0;        // transitions inside the binned range
  int cell_pairs = 0;        // off-diagonal (i<j) cell pairs in the statistic
  int sparse_excluded = 0;   // cell pairs dropped for low occupancy
  double statistic = 0.0;    // Bowker chi-square
  int dof = 0;
  double p_value = 0.0;
  bool passed = false;       // p > 0.001
  double lo = 0.0, hi = 0.0; // binned range (central 99% of mass)
};

/// Bowker symmetry test on binned transition pairs (x, y) ~ pi(dx) P(x, dy)
/// of a 1-d chain.
ReversibilityReport reversibility_check(const PotentialModel& potential,
                                        const KineticModel& kinetic,
                                        const GradientOracle& oracle,
                                        const SamplerConfig& config,
                                        int n_pairs, Rng& rng);

}  // namespace adhmc
