#pragma once

#include "adhmc/model.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace adhmc {

/// One realization omega of the stochastic potential: U^omega and its
/// gradient with the random choice frozen.
struct RealizedPotential {
  ScalarFn energy;
  VectorFn gradient;
  std::vector<std::size_t> subset;  // empty for non-subsetting oracles
};

/// Almost-sure smoothness bounds on every realization U^omega.
struct OracleBounds {
  double ell_bar = 0.0;
  double lip_bar = 0.0;
  double third_bar = 0.0;
};

/// E[(L^omega)^k] for the powers that enter the error and acceptance bounds.
struct LipschitzMoments {
  double half = 0.0;       // E[(L^omega)^{1/2}]
  double mean = 0.0;       // E[L^omega]
  double three_half = 0.0; // E[(L^omega)^{3/2}]
  double square = 0.0;     // E[(L^omega)^2]
  bool exact = true;       // false when estimated by Monte Carlo
};

enum class OracleKind { exact, minibatch, custom };

const char* to_string(OracleKind kind);

/// Randomized estimator of grad U. `draw` realizes a fresh omega per call.
class GradientOracle {
 public:
  using Realizer = std::function<RealizedPotential(Rng&)>;

  GradientOracle(OracleKind kind, Realizer realize, OracleBounds bounds,
                 LipschitzMoments moments);

  OracleKind kind() const { return kind_; }
  const OracleBounds& bounds() const { return bounds_; }
  const LipschitzMoments& moments() const { return moments_; }

  RealizedPotential realize(Rng& rng) const { return realize_(rng); }
  Vector draw(const Vector& q, Rng& rng) const {
    return realize_(rng).gradient(q);
  }

  /// Rebuilds the realization for a recorded subset (mini-batch only).
  RealizedPotential replay(const std::vector<std::size_t>& subset) const;

 private:
  friend GradientOracle minibatch_oracle(const PotentialModel&, int, Rng&);

  OracleKind kind_;
  Realizer realize_;
  OracleBounds bounds_;
  LipschitzMoments moments_;
  std::function<RealizedPotential(const std::vector<std::size_t>&)> replay_;
};

GradientOracle exact_oracle(const PotentialModel& potential);

/// (n/B) sum_{i in I} grad U_i with I a uniform size-B subset drawn without
/// replacement. `rng` is only used when the Lipschitz moments need Monte
/// Carlo (more than 1e4 subsets).
GradientOracle minibatch_oracle(const PotentialModel& potential, int batch,
                                Rng& rng);

struct UnbiasednessReport {
  double max_standardized_deviation = 0.0;
  bool passed = false;
};

/// For each probe q: max_i |mean_i - d_i U(q)| / SE_i over coordinates,
/// maximized over probes. A zero SE with a nonzero deviation counts as inf.
UnbiasednessReport check_unbiasedness(const GradientOracle& oracle,
                                      const PotentialModel& potential,
                                      int probes, int draws_per_probe,
                                      Rng& rng);

}  // namespace adhmc
