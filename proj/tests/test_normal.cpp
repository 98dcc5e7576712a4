#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dnnmp/normal.hpp"
#include "dnnmp/random.hpp"
#include "oracles.hpp"

using namespace dnnmp;

TEST(BivariateNormal, IndependentOriginQuadrant) { EXPECT_NEAR(bvn_cdf(0.0, 0.0, 0.0), 0.25, 1e-15); }

TEST(BivariateNormal, OrthantIdentityAtOrigin) {
  for (double rho : {-0.95, -0.5, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999999}) {
    const double expected = 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
    EXPECT_NEAR(bvn_cdf(0.0, 0.0, rho), expected, 1e-14) << "rho=" << rho;
  }
}

TEST(BivariateNormal, MatchesQuadratureAtOffCenterPoint) {
  EXPECT_NEAR(bvn_cdf(1.5, -0.3, 0.6), oracle::bvn(1.5, -0.3, 0.6), 1e-9);
}

TEST(BivariateNormal, MatchesQuadratureAcrossGrid) {
  const double pts[] = {-6.0, -3.2, -1.0, -0.2, 0.0, 0.7, 1.9, 3.5, 7.0};
  for (double rho : {0.0, 0.2, 0.5, 0.8, 0.95, 0.999}) {
    for (double x : pts) {
      for (double y : pts) {
        EXPECT_NEAR(bvn_cdf(x, y, rho), oracle::bvn(x, y, rho), 1e-10)
            << "x=" << x << " y=" << y << " rho=" << rho;
      }
    }
  }
}

TEST(BivariateNormal, InfiniteArguments) {
  EXPECT_EQ(bvn_cdf(-kInf, 0.3, 0.5), 0.0);
  EXPECT_NEAR(bvn_cdf(kInf, 0.3, 0.5), norm_cdf(0.3), 1e-15);
  EXPECT_NEAR(bvn_cdf(0.3, kInf, 0.5), norm_cdf(0.3), 1e-15);
}

TEST(NormalQuantile, InvertsCdfInBothTails) {
  for (double x : {-30.0, -8.0, -1.0, 0.0, 0.5, 3.0, 8.0}) {
    const Uniform level{oracle::phi_cdf(x), oracle::phi_cdf(-x)};
    EXPECT_NEAR(norm_quantile(level), x, 1e-9 * std::max(1.0, std::abs(x))) << x;
    if (x <= 0.0) {
      EXPECT_NEAR(norm_quantile(level.p), x, 1e-9 * std::max(1.0, std::abs(x))) << x;
    }
  }
}

TEST(NormalInterval, SumsOverPartition) {
  const double cuts[] = {-kInf, -1.3, 0.2, 0.9, 5.0, kInf};
  double total = 0.0;
  for (int k = 0; k < 5; ++k) total += norm_interval(cuts[k], cuts[k + 1]);
  EXPECT_NEAR(total, 1.0, 1e-15);
  const double tail = 0.5 * std::erfc(9.0 / std::numbers::sqrt2) - 0.5 * std::erfc(10.0 / std::numbers::sqrt2);
  EXPECT_NEAR(norm_interval(9.0, 10.0) / tail, 1.0, 1e-13);
}

TEST(GaussLegendreRule, IntegratesPolynomialsExactly) {
  const GaussLegendre rule(10);
  // degree 19 is exact for 10 nodes
  double s = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) s += rule.weights[k] * std::pow(rule.nodes[k], 18);
  EXPECT_NEAR(s, 2.0 / 19.0, 1e-14);
}

TEST(TruncatedNormal, StaysInsideAndMatchesLaw) {
  Rng rng(5);
  const double a = 1.2, b = 2.5;
  std::vector<double> x(20000);
  for (auto &v : x) {
    v = truncated_standard_normal(rng, a, b);
    ASSERT_GT(v, a - 1e-12);
    ASSERT_LT(v, b + 1e-12);
  }
  const double za = norm_cdf(a), zb = norm_cdf(b);
  const double d = oracle::ks_distance(x, [&](double v) { return (norm_cdf(v) - za) / (zb - za); });
  EXPECT_LT(d, 0.015);
}

TEST(TruncatedNormal, FarTailUsesRejection) {
  Rng rng(6);
  std::vector<double> x(20000);
  for (auto &v : x) {
    v = truncated_standard_normal(rng, 40.0, kInf);
    ASSERT_GE(v, 40.0);
  }
  // beyond a, the excess is close to exponential with rate a
  const double d = oracle::ks_distance(x, [](double v) {
    // exact conditional law: (Phi(-40) - Phi(-v)) / Phi(-40) via Mills' ratio asymptotics
    const double e = v - 40.0;
    return 1.0 - std::exp(-40.0 * e - 0.5 * e * e) * (40.0 / v) * (1.0 + 1.0 / (40.0 * 40.0)) / (1.0 + 1.0 / (v * v));
  });
  EXPECT_LT(d, 0.015);
}

TEST(Categorical, FollowsWeights) {
  Rng rng(9);
  const std::vector<double> lw = {std::log(0.2), -kInf, std::log(0.5), std::log(0.3)};
  std::vector<int> counts(4, 0);
  const int n = 200000;
  for (int k = 0; k < n; ++k) ++counts[categorical_log(rng, lw)];
  EXPECT_EQ(counts[1], 0);
  const double p[] = {0.2, 0.0, 0.5, 0.3};
  for (int k : {0, 2, 3}) {
    const double se = std::sqrt(p[k] * (1 - p[k]) / n);
    EXPECT_NEAR(counts[k] / double(n), p[k], 4 * se);
  }
}

TEST(Categorical, AllZeroWeightsIsAnError) {
  Rng rng(1);
  const std::vector<double> lw = {-kInf, -kInf};
  EXPECT_THROW(categorical_log(rng, lw), NumericalError);
}
