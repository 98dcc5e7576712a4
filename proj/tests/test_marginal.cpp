#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dnnmp/marginal.hpp"
#include "dnnmp/random.hpp"
#include "oracles.hpp"

using namespace dnnmp;

TEST(MarginalPmf, PoissonZero) {
  EXPECT_NEAR(CountDistribution(MarginalFamily::poisson, 5.0).pmf(0), std::exp(-5.0), 1e-17);
}

TEST(MarginalPmf, NegBinHalfProbability) {
  for (double r : {0.5, 1.0, 2.0, 7.3})
    EXPECT_NEAR(CountDistribution(MarginalFamily::negative_binomial, r, r).pmf(0), std::pow(2.0, -r), 1e-15);
}

TEST(MarginalPmf, NegBinRegressionValue) {
  Eigen::MatrixXd design(1, 3);
  design << 1.0, 1.0, 2.0;
  Eigen::VectorXd beta(3);
  beta << 1.5, 0.3, -0.2;
  const auto m = MarginalModel::negative_binomial(beta, 2.0, design);
  const double mu = std::exp(1.5 + 0.3 * 1 + (-0.2) * 2);
  EXPECT_NEAR(m.mean_at(0), mu, 1e-14);
  EXPECT_NEAR(pmf(m, 0, 3), oracle::negbin_pmf(3, mu, 2.0), 1e-15);
  EXPECT_NEAR(std::exp(log_pmf(m, 0, 3)), oracle::negbin_pmf(3, mu, 2.0), 1e-15);
}

TEST(MarginalPmf, LargeCountsStayFinite) {
  const CountDistribution g(MarginalFamily::negative_binomial, 800.0, 3.5);
  EXPECT_TRUE(std::isfinite(g.log_pmf(5000)));
  EXPECT_NEAR(g.pmf(700), oracle::negbin_pmf(700, 800.0, 3.5), 1e-10 * g.pmf(700));
}

TEST(MarginalCdf, MatchesDirectSummation) {
  const CountDistribution p(MarginalFamily::poisson, 5.0);
  const CountDistribution nb(MarginalFamily::negative_binomial, 4.2, 1.7);
  for (int y = -1; y < 30; ++y) {
    EXPECT_NEAR(p.cdf(y), y < 0 ? 0.0 : oracle::poisson_cdf(y, 5.0), 1e-15);
    EXPECT_NEAR(nb.cdf(y), y < 0 ? 0.0 : oracle::negbin_cdf(y, 4.2, 1.7), 1e-14);
    EXPECT_NEAR(p.cdf(y) + p.sf(y), 1.0, 1e-15);
  }
}

TEST(MarginalCdf, GeometricClosedForm) {
  const double mu = 2.5, p = 1.0 / (mu + 1.0);
  const CountDistribution g(MarginalFamily::negative_binomial, mu, 1.0);
  for (int k = 0; k < 40; ++k) EXPECT_NEAR(g.cdf(k), 1 - std::pow(1 - p, k + 1), 1e-14);
}

TEST(MarginalQuantile, SmallestCountReachingLevel) {
  Rng rng(3);
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  EXPECT_EQ(g.quantile(1e-300), 0);
  for (int k = 0; k < 1000; ++k) {
    const double t = uniform_open(rng);
    const int q = g.quantile(t);
    EXPECT_GE(oracle::poisson_cdf(q, 5.0), t);
    if (q > 0) {
      EXPECT_LT(oracle::poisson_cdf(q - 1, 5.0), t);
    }
  }
}

TEST(MarginalQuantile, UpperTailLevels) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  // P(Y > 30) is about 1.5e-11; a level just past it must return 31
  const double s30 = g.sf(30);
  EXPECT_EQ(g.quantile(Uniform::from_upper(0.5 * s30)), 31);
  EXPECT_EQ(g.quantile(Uniform::from_upper(s30)), 30);
}

TEST(MarginalMean, NegBinSeriesMatchesRegressionMean) {
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const double b0 = -1.0 + 3.0 * uniform_open(rng), b1 = uniform_open(rng) - 0.5;
    const double r = 0.3 + 5.0 * uniform_open(rng);
    Eigen::MatrixXd x(1, 2);
    x << 1.0, 2.0 * uniform_open(rng);
    Eigen::VectorXd beta(2);
    beta << b0, b1;
    const auto m = MarginalModel::negative_binomial(beta, r, x);
    const CountDistribution g = m.at(0);
    double mean = 0.0;
    const int top = support_bound(g, 1e-18) + 200;
    for (int y = 0; y <= top; ++y) mean += y * g.pmf(y);
    EXPECT_NEAR(mean, std::exp(x.row(0).dot(beta)), 1e-9);
  }
}

TEST(ContinuedCdf, BelowZeroIsLinearInFirstMass) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  for (double ys : {-0.9, -0.5, -0.01}) EXPECT_NEAR(continued_cdf(g, ys), (ys + 1) * g.pmf(0), 1e-17);
}

TEST(ContinuedCdf, AgreesAtIntegersAndBetween) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  for (int m = 0; m < 20; ++m) EXPECT_NEAR(continued_cdf(g, m), g.cdf(m), 1e-15);
  EXPECT_NEAR(continued_cdf(g, 2.5), oracle::poisson_cdf(2, 5.0) + 0.5 * oracle::poisson_pmf(3, 5.0), 1e-15);
}

TEST(ContinuedCdf, RejectsValuesAtOrBelowMinusOne) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  EXPECT_THROW(continued_cdf(g, -1.0), std::domain_error);
  EXPECT_THROW(continued_pmf(g, -1.5), std::domain_error);
}

TEST(ContinuedCdf, StrictlyIncreasingAndContinuous) {
  const CountDistribution g(MarginalFamily::negative_binomial, 3.0, 0.8);
  double prev = 0.0;
  const double h = 1.0 / 256.0;
  for (int k = 1; k < 5000; ++k) {
    const double ys = -1.0 + k * h;
    const double v = continued_cdf(g, ys);
    EXPECT_GT(v, prev);
    // slope on the step just taken is g at the count of its midpoint
    EXPECT_NEAR(v - prev, h * g.pmf(static_cast<int>(std::floor(ys - 0.5 * h + 1))), 1e-15);
    prev = v;
  }
}

TEST(ContinuedInverse, RoundTrip) {
  Rng rng(11);
  for (auto g : {CountDistribution(MarginalFamily::poisson, 5.0), CountDistribution(MarginalFamily::negative_binomial, 7.0, 1.3)}) {
    for (int k = 0; k < 1000; ++k) {
      const double t = uniform_open(rng);
      const double ys = continued_inverse(g, t);
      EXPECT_NEAR(continued_cdf(g, ys), t, 1e-12);
      const ContinuedValue v = continued_inverse_value(g, Uniform::from_lower(t));
      EXPECT_EQ(static_cast<int>(std::floor(v.y_star() + 1)), v.y);
      EXPECT_GE(v.o, 0.0);
      EXPECT_LE(v.o, 1.0);
    }
  }
}

TEST(ContinuedInverse, BelowFirstMass) {
  const CountDistribution g(MarginalFamily::poisson, 2.0);
  const double t = 0.5 * g.pmf(0);
  EXPECT_NEAR(continued_inverse(g, t), t / g.pmf(0) - 1.0, 1e-15);
  EXPECT_EQ(continued_inverse_value(g, Uniform::from_lower(t)).y, 0);
}

TEST(ContinuedInverse, AtIntegerCdfValue) {
  const CountDistribution g(MarginalFamily::poisson, 2.0);
  for (int m = 0; m < 6; ++m) EXPECT_NEAR(continued_inverse(g, g.cdf(m)), m, 1e-12);
}

TEST(ContinuedPmf, StepFunction) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  EXPECT_EQ(continued_pmf(g, 4.3), g.pmf(5));
  EXPECT_EQ(continued_pmf(g, -0.4), g.pmf(0));
  // piecewise-constant integration over (-1, M)
  for (int m : {0, 3, 9}) {
    double s = 0.0;
    const int steps = 1000;
    for (int j = 0; j < (m + 1) * steps; ++j) s += continued_pmf(g, -1.0 + (j + 0.5) / steps) / steps;
    EXPECT_NEAR(s, g.cdf(m), 1e-12);
  }
}

TEST(ContinuedPmf, IsTheDensityOfJitteredCounts) {
  // histogram of Y - O on unit bins against g, chi-square at 1%
  Rng rng(21);
  const CountDistribution g(MarginalFamily::poisson, 4.0);
  const int n = 1000000, bins = 12;
  std::vector<double> counts(bins + 1, 0.0);
  for (int k = 0; k < n; ++k) {
    const int y = g.quantile(uniform_open(rng));
    const double ys = y - uniform_open(rng);
    const int bin = std::min(bins, static_cast<int>(std::floor(ys + 1)));
    counts[static_cast<std::size_t>(bin)] += 1;
  }
  double chi2 = 0.0;
  for (int b = 0; b <= bins; ++b) {
    const double p = b < bins ? continued_pmf(g, b - 0.5) : g.sf(bins - 1);
    const double e = p * n;
    chi2 += (counts[static_cast<std::size_t>(b)] - e) * (counts[static_cast<std::size_t>(b)] - e) / e;
  }
  // 1% upper point of chi-square with 12 degrees of freedom
  EXPECT_LT(chi2, 26.217);
}

TEST(ContinuedLevels, UpperTailPairIsAccurate) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  const Uniform u = g.continued(35, 0.25);
  double expected_q = 0.25 * oracle::poisson_pmf(35, 5.0);
  for (int k = 36; k < 200; ++k) expected_q += oracle::poisson_pmf(k, 5.0);
  EXPECT_NEAR(u.q / expected_q, 1.0, 1e-10);
}

TEST(SupportBound, TailBelowTolerance) {
  const CountDistribution g(MarginalFamily::poisson, 5.0);
  const int m = support_bound(g);
  EXPECT_LT(g.sf(m), 1e-12);
  EXPECT_GE(g.sf(m - 1), 1e-12);
}
