#include "adhmc/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>

using namespace adhmc;

namespace {

PotentialModel small_logistic(int n) { return logistic_ridge_potential(2, n, 1.0, 2.0, 11); }

}  // namespace

TEST(Oracle, ExactOracleReturnsTrueGradient) {
  const auto u = logistic_ridge_potential(3, 50, 1.0, 2.0, 7);
  const auto oracle = exact_oracle(u);
  Rng rng = make_stream(1, "exact");
  const Vector q = Vector::LinSpaced(3, -1.0, 2.0);
  EXPECT_EQ((oracle.draw(q, rng) - u.gradient(q)).norm(), 0.0);
  EXPECT_EQ(oracle.kind(), OracleKind::exact);
  EXPECT_DOUBLE_EQ(oracle.bounds().lip_bar, u.certificate.lip);
  EXPECT_DOUBLE_EQ(oracle.moments().three_half, std::pow(u.certificate.lip, 1.5));
}

TEST(Oracle, MinibatchIsUnbiased) {
  const auto u = small_logistic(100);
  Rng rng = make_stream(2, "mb");
  const auto oracle = minibatch_oracle(u, 10, rng);
  const auto report = check_unbiasedness(oracle, u, 10, 20000, rng);
  EXPECT_TRUE(report.passed) << report.max_standardized_deviation;
}

TEST(Oracle, BiasedOracleIsCaught) {
  const auto u = gaussian_potential(2);
  GradientOracle biased(
      OracleKind::custom,
      [&u](Rng&) {
        return RealizedPotential{u.energy,
                                 [&u](const Vector& q) -> Vector {
                                   return u.gradient(q) + Vector::Constant(q.size(), 0.05);
                                 },
                                 {}};
      },
      {1.0, 1.0, 0.0}, {});
  Rng rng = make_stream(3, "biased");
  EXPECT_FALSE(check_unbiasedness(biased, u, 3, 100, rng).passed);
}

TEST(Oracle, BoundsFromExtremeComponents) {
  const auto u = small_logistic(8);
  Rng rng = make_stream(4, "bounds");
  const auto oracle = minibatch_oracle(u, 3, rng);
  std::vector<double> lips, ells, thirds;
  for (const auto& c : *u.components) {
    lips.push_back(c.certificate.lip);
    ells.push_back(c.certificate.ell);
    thirds.push_back(c.certificate.third);
  }
  std::sort(lips.rbegin(), lips.rend());
  std::sort(thirds.rbegin(), thirds.rend());
  std::sort(ells.begin(), ells.end());
  const double scale = 8.0 / 3.0;
  EXPECT_NEAR(oracle.bounds().lip_bar, scale * (lips[0] + lips[1] + lips[2]), 1e-12);
  EXPECT_NEAR(oracle.bounds().third_bar, scale * (thirds[0] + thirds[1] + thirds[2]), 1e-12);
  EXPECT_NEAR(oracle.bounds().ell_bar, scale * (ells[0] + ells[1] + ells[2]), 1e-12);
  EXPECT_LE(oracle.bounds().ell_bar, oracle.bounds().lip_bar);
}

TEST(Oracle, RealizationsRespectAlmostSureBounds) {
  const auto u = small_logistic(20);
  Rng rng = make_stream(5, "as");
  const auto oracle = minibatch_oracle(u, 4, rng);
  EnergyFunction realized;
  realized.dim = 2;
  realized.certificate = {oracle.bounds().ell_bar, oracle.bounds().lip_bar,
                          oracle.bounds().third_bar};
  for (int k = 0; k < 20; ++k) {
    const auto r = oracle.realize(rng);
    realized.energy = r.energy;
    realized.gradient = r.gradient;
    EXPECT_EQ(verify_certificate(realized, 300, rng).violations, 0);
    EXPECT_LT(gradient_consistency_error(realized, 20, rng), 1e-6);
  }
}

TEST(Oracle, LipschitzMomentsByEnumeration) {
  const auto u = small_logistic(8);
  Rng rng = make_stream(6, "enum");
  const auto oracle = minibatch_oracle(u, 3, rng);
  ASSERT_TRUE(oracle.moments().exact);
  // Brute force over the 56 subsets, coded independently via bitmasks.
  double half = 0, mean = 0, th = 0, sq = 0;
  int count = 0;
  for (unsigned mask = 0; mask < (1u << 8); ++mask) {
    if (std::popcount(mask) != 3) continue;
    double lip = 0.0;
    for (int i = 0; i < 8; ++i)
      if (mask & (1u << i)) lip += (*u.components)[i].certificate.lip;
    lip *= 8.0 / 3.0;
    half += std::sqrt(lip);
    mean += lip;
    th += std::pow(lip, 1.5);
    sq += lip * lip;
    ++count;
  }
  ASSERT_EQ(count, 56);
  EXPECT_NEAR(oracle.moments().half, half / count, 1e-12);
  EXPECT_NEAR(oracle.moments().mean, mean / count, 1e-12);
  EXPECT_NEAR(oracle.moments().three_half, th / count, 1e-12);
  EXPECT_NEAR(oracle.moments().square, sq / count, 1e-12);
}

TEST(Oracle, LipschitzMomentsByMonteCarlo) {
  const auto u = small_logistic(100);
  Rng rng = make_stream(7, "mc");
  const auto oracle = minibatch_oracle(u, 10, rng);
  EXPECT_FALSE(oracle.moments().exact);
  // E[(n/B) sum_{i in I} L_i] = sum_i L_i exactly
  double total = 0.0;
  for (const auto& c : *u.components) total += c.certificate.lip;
  EXPECT_NEAR(oracle.moments().mean, total, 0.01 * total);
  // Jensen ordering
  EXPECT_LE(oracle.moments().half * oracle.moments().half, oracle.moments().mean);
  EXPECT_LE(oracle.moments().mean * oracle.moments().mean, oracle.moments().square);
}

TEST(Oracle, FullBatchIsExactGradient) {
  const auto u = small_logistic(12);
  Rng rng = make_stream(8, "full");
  const auto oracle = minibatch_oracle(u, 12, rng);
  const Vector q = Vector::Constant(2, 0.3);
  EXPECT_LT((oracle.draw(q, rng) - u.gradient(q)).norm(), 1e-12);
}

TEST(Oracle, ReplayReproducesRealization) {
  const auto u = small_logistic(30);
  Rng rng = make_stream(9, "replay");
  const auto oracle = minibatch_oracle(u, 5, rng);
  const auto r = oracle.realize(rng);
  ASSERT_EQ(r.subset.size(), 5u);
  EXPECT_TRUE(std::is_sorted(r.subset.begin(), r.subset.end()));
  const auto again = oracle.replay(r.subset);
  const Vector q = Vector::Constant(2, -0.7);
  EXPECT_EQ((r.gradient(q) - again.gradient(q)).norm(), 0.0);
  EXPECT_THROW(oracle.replay({0, 1}), ConfigError);
  EXPECT_THROW(exact_oracle(u).replay({0}), ConfigError);
}

TEST(Oracle, InvalidConstructionThrows) {
  Rng rng = make_stream(10, "bad");
  EXPECT_THROW(minibatch_oracle(gaussian_potential(2), 1, rng), ConfigError);
  EXPECT_THROW(minibatch_oracle(small_logistic(10), 11, rng), ConfigError);
  EXPECT_THROW(minibatch_oracle(small_logistic(10), 0, rng), ConfigError);
  EXPECT_THROW(GradientOracle(OracleKind::custom, {}, {2.0, 1.0, 0.0}, {}), ConfigError);
}
