#include "adhmc/sampler.hpp"

#include "adhmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adhmc {

const char* to_string(Algorithm algorithm) {
  return algorithm == Algorithm::sghmc ? "sghmc" : "adhmc";
}

void SamplerConfig::validate() const {
  leapfrog.validate();
  if (oracle.kind == OracleKind::minibatch && oracle.batch < 1)
    throw ConfigError("minibatch oracle needs batch >= 1");
}

double ChainRecord::acceptance_rate() const {
  if (accept_flags.empty()) return 0.0;
  return static_cast<double>(
             std::count(accept_flags.begin(), accept_flags.end(), true)) /
         static_cast<double>(accept_flags.size());
}

double acceptance_log_ratio_hmc(const PhaseState& start, const PhaseState& end,
                                const PotentialModel& potential,
                                const KineticModel& kinetic) {
  const double h0 = potential.energy(start.q) + kinetic.energy(start.p);
  const double h1 = potential.energy(end.q) + kinetic.energy(end.p);
  const double diff = h0 - h1;
  if (!std::isfinite(diff)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, diff);
}

namespace {

StepResult rejected(const Vector& q, double log_ratio, double gap,
                    bool flagged) {
  StepResult r;
  r.q = q;
  r.record.accepted = false;
  r.record.log_ratio = log_ratio;
  r.record.energy_gap = gap;
  r.record.flagged = flagged;
  return r;
}

StepResult flagged_rejection(const Vector& q) {
  return rejected(q, -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::quiet_NaN(), true);
}

// Accept `proposal` iff Z <= exp(log_ratio), Z ~ Uniform(0, 1).
StepResult metropolis(const Vector& q, const Vector& proposal, double gap,
                      Rng& rng) {
  if (!std::isfinite(gap)) return flagged_rejection(q);
  const double log_ratio = std::min(0.0, -gap);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double z = unif(rng);
  if (z <= std::exp(log_ratio)) {
    StepResult r;
    r.q = proposal;
    r.record.accepted = true;
    r.record.log_ratio = log_ratio;
    r.record.energy_gap = gap;
    return r;
  }
  return rejected(q, log_ratio, gap, false);
}

LeapfrogConfig with_direction(LeapfrogConfig config, Direction direction) {
  config.direction = direction;
  return config;
}

}  // namespace

StepResult sghmc_step(const Vector& q, const PotentialModel& potential,
                      const KineticModel& kinetic, const GradientOracle& oracle,
                      const SamplerConfig& config, Rng& rng) {
  if (config.algorithm != Algorithm::sghmc)
    throw ConfigError("sghmc_step called with a non-sghmc config");
  PhaseState start(q, sample_auxiliary(kinetic, rng));
  PhaseState end;
  try {
    end = leapfrog_trajectory(start, oracle, kinetic,
                              with_direction(config.leapfrog, Direction::forward),
                              rng)
              .back();
  } catch (const IntegrationError&) {
    return flagged_rejection(q);
  }
  const double gap = potential.energy(end.q) + kinetic.energy(end.p) -
                     potential.energy(start.q) - kinetic.energy(start.p);
  return metropolis(q, end.q, gap, rng);
}

StepResult adhmc_step(const Vector& q, const PotentialModel& potential,
                      const KineticModel& kinetic, const GradientOracle& oracle,
                      const SamplerConfig& config, Rng& rng) {
  if (config.algorithm != Algorithm::adhmc)
    throw ConfigError("adhmc_step called with a non-adhmc config");
  PhaseState forward_start(q, sample_auxiliary(kinetic, rng));
  PhaseState forward_end, backward_start, backward_end;
  try {
    forward_end =
        leapfrog_trajectory(forward_start, oracle, kinetic,
                            with_direction(config.leapfrog, Direction::forward),
                            rng)
            .back();
    backward_start = PhaseState(forward_end.q, sample_auxiliary(kinetic, rng));
    backward_end =
        leapfrog_trajectory(backward_start, oracle, kinetic,
                            with_direction(config.leapfrog, Direction::backward),
                            rng)
            .back();
  } catch (const IntegrationError&) {
    return flagged_rejection(q);
  }
  // -log of f(q'K) g(pK) g(p'K) minus -log of f(q0) g(p0) g(p'0).
  const double proposal = potential.energy(backward_end.q) +
                          kinetic.energy(forward_end.p) +
                          kinetic.energy(backward_end.p);
  const double current = potential.energy(forward_start.q) +
                         kinetic.energy(forward_start.p) +
                         kinetic.energy(backward_start.p);
  return metropolis(q, backward_end.q, proposal - current, rng);
}

StepResult sampler_step(const Vector& q, const PotentialModel& potential,
                        const KineticModel& kinetic,
                        const GradientOracle& oracle,
                        const SamplerConfig& config, Rng& rng) {
  return config.algorithm == Algorithm::sghmc
             ? sghmc_step(q, potential, kinetic, oracle, config, rng)
             : adhmc_step(q, potential, kinetic, oracle, config, rng);
}

ChainRecord run_chain(const Vector& q0, const PotentialModel& potential,
                      const KineticModel& kinetic, const GradientOracle& oracle,
                      const SamplerConfig& config, int n_steps, Rng& rng) {
  config.validate();
  if (n_steps < 1) throw ConfigError("run_chain needs n_steps >= 1");
  if (q0.size() != potential.dim || !q0.allFinite())
    throw ConfigError("initial position must be finite with length d");

  ChainRecord chain;
  chain.config = config;
  chain.seed_trace = config.seed;
  chain.positions.reserve(n_steps + 1);
  chain.accept_flags.reserve(n_steps);
  chain.log_ratios.reserve(n_steps);
  chain.energy_gaps.reserve(n_steps);
  chain.flagged.reserve(n_steps);
  chain.positions.push_back(q0);
  for (int t = 0; t < n_steps; ++t) {
    StepResult step =
        sampler_step(chain.positions.back(), potential, kinetic, oracle, config, rng);
    chain.positions.push_back(std::move(step.q));
    chain.accept_flags.push_back(step.record.accepted);
    chain.log_ratios.push_back(step.record.log_ratio);
    chain.energy_gaps.push_back(step.record.energy_gap);
    chain.flagged.push_back(step.record.flagged);
  }
  return chain;
}

double warmup_step_size(const PotentialModel& potential) {
  return 0.3 / std::sqrt(potential.certificate.lip);
}

std::vector<Vector> stationary_positions(const PotentialModel& potential,
                                         int count, Rng& rng, int warmup,
                                         int thin) {
  if (count < 1) throw ConfigError("stationary_positions needs count >= 1");
  std::vector<Vector> out;
  out.reserve(count);
  if (potential.exact_sampler) {
    for (int i = 0; i < count; ++i) out.push_back(potential.exact_sampler(rng));
    return out;
  }
  const KineticModel kinetic = gaussian_kinetic(potential.dim);
  const GradientOracle oracle = exact_oracle(potential);
  SamplerConfig config;
  config.leapfrog = {warmup_step_size(potential), 5, Direction::forward};
  config.algorithm = Algorithm::sghmc;
  Vector q = Vector::Zero(potential.dim);
  for (int t = 0; t < warmup; ++t)
    q = sghmc_step(q, potential, kinetic, oracle, config, rng).q;
  for (int i = 0; i < count; ++i) {
    for (int t = 0; t < std::max(thin, 1); ++t)
      q = sghmc_step(q, potential, kinetic, oracle, config, rng).q;
    out.push_back(q);
  }
  return out;
}

ReversibilityReport reversibility_check(const PotentialModel& potential,
                                        const KineticModel& kinetic,
                                        const GradientOracle& oracle,
                                        const SamplerConfig& config,
                                        int n_pairs, Rng& rng) {
  if (potential.dim != 1)
    throw ConfigError("reversibility check needs a 1-d target");
  if (n_pairs < 100) throw ConfigError("reversibility check needs n_pairs >= 100");
  config.validate();

  std::vector<double> xs, ys;
  xs.reserve(n_pairs);
  ys.reserve(n_pairs);
  if (potential.exact_sampler) {
    // Independent pairs x ~ pi, y ~ P(x, .).
    for (int i = 0; i < n_pairs; ++i) {
      const Vector x = potential.exact_sampler(rng);
      const Vector y = sampler_step(x, potential, kinetic, oracle, config, rng).q;
      xs.push_back(x[0]);
      ys.push_back(y[0]);
    }
  } else {
    constexpr int kThin = 5;
    Vector q = stationary_positions(potential, 1, rng).front();
    for (int t = 0; t < n_pairs / 10; ++t)
      q = sampler_step(q, potential, kinetic, oracle, config, rng).q;
    for (int i = 0; i < n_pairs; ++i) {
      for (int t = 0; t + 1 < kThin; ++t)
        q = sampler_step(q, potential, kinetic, oracle, config, rng).q;
      const Vector y = sampler_step(q, potential, kinetic, oracle, config, rng).q;
      xs.push_back(q[0]);
      ys.push_back(y[0]);
      q = y;
    }
  }

  std::vector<double> pooled = xs;
  pooled.insert(pooled.end(), ys.begin(), ys.end());
  std::sort(pooled.begin(), pooled.end());
  auto quantile = [&](double u) {
    return pooled[static_cast<std::size_t>(u * (pooled.size() - 1))];
  };
  ReversibilityReport report;
  report.lo = quantile(0.005);
  report.hi = quantile(0.995);

  for (int bins : {20, 16, 12, 10, 8, 6, 5, 4}) {
    const double width = (report.hi - report.lo) / bins;
    std::vector<long> counts(bins * bins, 0);
    int used = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (xs[k] < report.lo || xs[k] >= report.hi || ys[k] < report.lo ||
          ys[k] >= report.hi)
        continue;
      const int i = std::min(bins - 1, static_cast<int>((xs[k] - report.lo) / width));
      const int j = std::min(bins - 1, static_cast<int>((ys[k] - report.lo) / width));
      ++counts[i * bins + j];
      ++used;
    }
    int occupied = 0, sparse = 0, dof = 0;
    double stat = 0.0;
    for (int i = 0; i < bins; ++i) {
      for (int j = i + 1; j < bins; ++j) {
        const double a = counts[i * bins + j], b = counts[j * bins + i];
        if (a + b == 0) continue;
        ++occupied;
        if ((a + b) / 2.0 < 5.0) {
          ++sparse;
          continue;
        }
        stat += (a - b) * (a - b) / (a + b);
        ++dof;
      }
    }
    report.bins = bins;
    report.pairs_used = used;
    report.cell_pairs = dof;
    report.sparse_excluded = sparse;
    report.statistic = stat;
    report.dof = dof;
    if (occupied > 0 && sparse > 0.2 * occupied && bins > 4) continue;
    break;
  }
  report.p_value = stats::chi_square_sf(report.statistic, report.dof);
  report.passed = report.dof > 0 && report.p_value > 0.001;
  return report;
}

}  // namespace adhmc
