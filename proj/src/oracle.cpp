#include "adhmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace adhmc {

namespace {

using Components = std::shared_ptr<const std::vector<EnergyFunction>>;

RealizedPotential realize_subset(const Components& components,
                                 std::vector<std::size_t> subset) {
  const double scale =
      static_cast<double>(components->size()) / static_cast<double>(subset.size());
  RealizedPotential r;
  r.energy = [components, subset, scale](const Vector& q) {
    double u = 0.0;
    for (auto i : subset) u += (*components)[i].energy(q);
    return scale * u;
  };
  r.gradient = [components, subset, scale](const Vector& q) -> Vector {
    Vector g = Vector::Zero(q.size());
    for (auto i : subset) g += (*components)[i].gradient(q);
    return scale * g;
  };
  r.subset = std::move(subset);
  return r;
}

// Partial Fisher-Yates: uniform size-`batch` subset of [0, n), sorted.
std::vector<std::size_t> draw_subset(std::size_t n, std::size_t batch,
                                     Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < batch; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(batch);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double binomial(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0));
}

void accumulate(LipschitzMoments& m, double lip, double weight) {
  m.half += weight * std::sqrt(lip);
  m.mean += weight * lip;
  m.three_half += weight * lip * std::sqrt(lip);
  m.square += weight * lip * lip;
}

}  // namespace

const char* to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::exact:
      return "exact";
    case OracleKind::minibatch:
      return "minibatch";
    case OracleKind::custom:
      return "custom";
  }
  return "unknown";
}

GradientOracle::GradientOracle(OracleKind kind, Realizer realize,
                               OracleBounds bounds, LipschitzMoments moments)
    : kind_(kind),
      realize_(std::move(realize)),
      bounds_(bounds),
      moments_(moments) {
  if (!(bounds_.ell_bar <= bounds_.lip_bar))
    throw ConfigError("oracle bounds require ell_bar <= lip_bar");
}

RealizedPotential GradientOracle::replay(
    const std::vector<std::size_t>& subset) const {
  if (!replay_) throw ConfigError("oracle does not support replay");
  return replay_(subset);
}

GradientOracle exact_oracle(const PotentialModel& potential) {
  const auto& c = potential.certificate;
  LipschitzMoments m;
  accumulate(m, c.lip, 1.0);
  RealizedPotential full{potential.energy, potential.gradient, {}};
  return GradientOracle(
      OracleKind::exact, [full](Rng&) { return full; },
      {c.ell, c.lip, c.third}, m);
}

GradientOracle minibatch_oracle(const PotentialModel& potential, int batch,
                                Rng& rng) {
  if (!potential.has_components())
    throw ConfigError("minibatch oracle: potential '" + potential.id +
                      "' has no components");
  const auto components = potential.components;
  const int n = static_cast<int>(components->size());
  if (batch < 1 || batch > n)
    throw ConfigError("minibatch oracle: batch must satisfy 1 <= B <= n = " +
                      std::to_string(n));

  const double scale = static_cast<double>(n) / batch;
  std::vector<double> ells, lips, thirds;
  for (const auto& c : *components) {
    ells.push_back(c.certificate.ell);
    lips.push_back(c.certificate.lip);
    thirds.push_back(c.certificate.third);
  }
  auto extreme_sum = [batch](std::vector<double> v, bool largest) {
    if (largest)
      std::sort(v.begin(), v.end(), std::greater<>());
    else
      std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.begin() + batch, 0.0);
  };
  OracleBounds bounds{scale * extreme_sum(ells, false),
                      scale * extreme_sum(lips, true),
                      scale * extreme_sum(thirds, true)};

  // Batch Lipschitz constant L^omega = (n/B) sum_{i in I} L_i.
  LipschitzMoments moments;
  auto batch_lip = [&](const std::vector<std::size_t>& subset) {
    double s = 0.0;
    for (auto i : subset) s += lips[i];
    return scale * s;
  };
  const double count = binomial(n, batch);
  if (count <= 1e4 + 0.5) {
    // Enumerate subsets in lexicographic order.
    std::vector<std::size_t> subset(batch);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
    const double weight = 1.0 / std::round(count);
    for (;;) {
      accumulate(moments, batch_lip(subset), weight);
      int k = batch - 1;
      while (k >= 0 && subset[k] == static_cast<std::size_t>(n - batch + k)) --k;
      if (k < 0) break;
      ++subset[k];
      for (int j = k + 1; j < batch; ++j) subset[j] = subset[j - 1] + 1;
    }
    moments.exact = true;
  } else {
    constexpr int kDraws = 10000;
    for (int t = 0; t < kDraws; ++t)
      accumulate(moments, batch_lip(draw_subset(n, batch, rng)), 1.0 / kDraws);
    moments.exact = false;
  }

  GradientOracle oracle(
      OracleKind::minibatch,
      [components, n, batch](Rng& r) {
        return realize_subset(components, draw_subset(n, batch, r));
      },
      bounds, moments);
  oracle.replay_ = [components, n, batch](const std::vector<std::size_t>& s) {
    if (static_cast<int>(s.size()) != batch)
      throw ConfigError("replayed subset has the wrong size");
    for (auto i : s)
      if (i >= static_cast<std::size_t>(n))
        throw ConfigError("replayed subset index out of range");
    return realize_subset(components, s);
  };
  return oracle;
}

UnbiasednessReport check_unbiasedness(const GradientOracle& oracle,
                                      const PotentialModel& potential,
                                      int probes, int draws_per_probe,
                                      Rng& rng) {
  if (probes < 1 || draws_per_probe < 1)
    throw ConfigError("check_unbiasedness needs probes, draws >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  UnbiasednessReport report;
  const double n = draws_per_probe;
  for (int t = 0; t < probes; ++t) {
    Vector q(potential.dim);
    for (int i = 0; i < potential.dim; ++i) q[i] = normal(rng);
    Vector sum = Vector::Zero(potential.dim);
    Vector sum_sq = Vector::Zero(potential.dim);
    for (int k = 0; k < draws_per_probe; ++k) {
      const Vector g = oracle.draw(q, rng);
      sum += g;
      sum_sq += g.cwiseProduct(g);
    }
    const Vector mean = sum / n;
    const Vector truth = potential.gradient(q);
    for (int i = 0; i < potential.dim; ++i) {
      const double var =
          draws_per_probe > 1
              ? std::max(sum_sq[i] / n - mean[i] * mean[i], 0.0) * n / (n - 1)
              : 0.0;
      const double se = std::sqrt(var / n);
      const double dev = std::abs(mean[i] - truth[i]);
      // Constant draws still carry summation rounding; treat deviations at
      // that level as zero.
      const double rounding = 1e-12 * (1.0 + std::abs(truth[i]));
      double z = 0.0;
      if (dev > rounding) {
        z = se > 0.0 ? dev / se : std::numeric_limits<double>::infinity();
      }
      report.max_standardized_deviation =
          std::max(report.max_standardized_deviation, z);
    }
  }
  report.passed = report.max_standardized_deviation < 4.0;
  return report;
}

}  // namespace adhmc
