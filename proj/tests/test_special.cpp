#include "mlvamp/quadrature.hpp"
#include "mlvamp/special.hpp"

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace mlvamp;

TEST(Special, NormalPdfCdfMatchBoost) {
  const boost::math::normal_distribution<double> n01;
  for (double x = -8.0; x <= 8.0; x += 0.37) {
    EXPECT_NEAR(special::norm_pdf(x), boost::math::pdf(n01, x), 1e-15);
    const double ref = boost::math::cdf(n01, x);
    EXPECT_NEAR(special::norm_cdf(x), ref, 1e-15 + 1e-13 * ref) << x;
  }
}

TEST(Special, QuantileInvertsCdf) {
  for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.4, 0.5, 0.77, 0.99, 1 - 1e-9}) {
    const double x = special::norm_quantile(p);
    EXPECT_NEAR(special::norm_cdf(x), p, 1e-12 * std::max(p, 1e-3)) << p;
  }
  EXPECT_DOUBLE_EQ(special::norm_quantile(0.5), 0.0);
}

TEST(Special, LogCdfDeepTailMatchesAsymptoticSeries) {
  for (double x : {-20.0, -40.0, -200.0}) {
    const double x2 = x * x;
    const double series = -0.5 * x2 - special::kLogSqrt2Pi - std::log(-x) +
                          std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
    EXPECT_NEAR(special::log_norm_cdf(x), series, 1e-9 * std::abs(series)) << x;
  }
  EXPECT_NEAR(special::log_norm_cdf(0.0), std::log(0.5), 1e-15);
  EXPECT_NEAR(special::log_norm_cdf(3.0), std::log(boost::math::cdf(boost::math::normal(), 3.0)),
              1e-14);
}

TEST(Special, MillsExcessModerateAndLarge) {
  const boost::math::normal_distribution<double> n01;
  for (double a : {-3.0, -0.5, 0.0, 1.0, 4.0}) {
    const double lambda = boost::math::pdf(n01, a) / boost::math::cdf(boost::math::complement(n01, a));
    EXPECT_NEAR(special::mills_excess(a), lambda - a, 1e-12) << a;
  }
  for (double a : {50.0, 1e3, 1e6}) {
    const double a2 = a * a;
    const double series = 1.0 / a - 2.0 / (a * a2) + 10.0 / (a * a2 * a2);
    EXPECT_NEAR(special::mills_excess(a), series, 1e-6 * series) << a;
  }
}

// Brute-force moments of a truncated normal by a fine midpoint sum.
static special::TruncatedMoments brute_truncated(double mu, double sd, double lo, double hi) {
  const double a = std::isfinite(lo) ? lo : mu - 40 * sd;
  const double b = std::isfinite(hi) ? hi : mu + 40 * sd;
  const int n = 400000;
  const double h = (b - a) / n;
  double m0 = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a + (i + 0.5) * h;
    const double w = std::exp(-0.5 * (x - mu) * (x - mu) / (sd * sd)) / (sd * std::sqrt(2 * M_PI)) * h;
    m0 += w;
    m1 += w * x;
    m2 += w * x * x;
  }
  const double mean = m1 / m0;
  return {std::log(m0), mean, m2 / m0 - mean * mean};
}

TEST(Special, TruncatedNormalMatchesBruteForce) {
  struct Case {
    double mu, sd, lo, hi;
  };
  const double inf = INFINITY;
  for (const Case& c : {Case{0.3, 1.2, 0.0, inf}, Case{-2.0, 0.5, 0.0, inf}, Case{1.0, 2.0, -inf, 0.0},
                        Case{0.0, 1.0, -inf, inf}, Case{-1.0, 0.3, -inf, -0.5}}) {
    const auto got = special::truncated_normal(c.mu, c.sd, c.lo, c.hi);
    const auto ref = brute_truncated(c.mu, c.sd, c.lo, c.hi);
    EXPECT_NEAR(got.log_mass, ref.log_mass, 1e-7);
    EXPECT_NEAR(got.mean, ref.mean, 1e-7 * c.sd);
    EXPECT_NEAR(got.var, ref.var, 1e-6 * c.sd * c.sd);
  }
}

TEST(Special, TruncatedNormalFarTailStaysAccurate) {
  // Mass 40 sd below the cut: the conditional mean sits just above the bound.
  const auto t = special::truncated_normal(-40.0, 1.0, 0.0, INFINITY);
  EXPECT_GT(t.mean, 0.0);
  EXPECT_NEAR(t.mean, 1.0 / 40.0, 2e-3 / 40.0);
  EXPECT_NEAR(t.var, 1.0 / 1600.0, 1e-2 / 1600.0);
  EXPECT_TRUE(std::isfinite(t.log_mass));
  EXPECT_LT(t.log_mass, -800.0);
}

TEST(Quadrature, HermiteReproducesGaussianMoments) {
  const auto& r = quad::gauss_hermite(20);
  double odd = 1.0;  // (2k - 1)!!
  for (int k = 0; k <= 19; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * std::pow(r.nodes[i], 2 * k);
    EXPECT_NEAR(acc, odd, 1e-10 * odd) << 2 * k;
    odd *= 2 * k + 1;
  }
}

TEST(Quadrature, LegendreIsExactForPolynomials) {
  const auto& r = quad::gauss_legendre(16);
  for (int k = 0; k <= 31; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * std::pow(r.nodes[i], k);
    const double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
    EXPECT_NEAR(acc, exact, 1e-14) << k;
  }
}
