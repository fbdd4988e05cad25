#include "mlvamp/error.hpp"
#include "mlvamp/scalar_denoiser.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mlvamp;

namespace {

const ScalarChannel kRelu{Activation::relu, 0.0};
const ScalarChannel kNoisyRelu{Activation::relu, 0.05};

// Identity channel: (z_in, z_out) is jointly Gaussian.
DenoiseResult identity_exact(double var_noise, double rp, double rm, double gp, double gm) {
  Eigen::Matrix2d j;
  j << gp + 1.0 / var_noise, -1.0 / var_noise, -1.0 / var_noise, 1.0 / var_noise + gm;
  const Eigen::Matrix2d c = j.inverse();
  const Eigen::Vector2d m = c * Eigen::Vector2d(gp * rp, gm * rm);
  return {m(0), m(1), c(0, 0), c(1, 1)};
}

// Midpoint sum over z_in of the prior message times the channel integrated against the
// output message in closed form.
DenoiseResult brute_force(const ScalarChannel& ch, double rp, double rm, double gp, double gm) {
  const double sd = 1.0 / std::sqrt(gp);
  const double lo = rp - 14 * sd - 20.0, hi = rp + 14 * sd + 20.0;
  const int n = 2000000;
  const double h = (hi - lo) / n;
  const double s2 = ch.noise_var;
  const double geff = gm / (1.0 + gm * s2);
  const double w = 1.0 / (1.0 + gm * s2);
  double logs_max = -INFINITY;
  std::vector<double> lw(n);
  for (int i = 0; i < n; ++i) {
    const double z = lo + (i + 0.5) * h;
    const double f = ch.activation == Activation::relu ? std::max(z, 0.0) : z;
    lw[i] = -0.5 * gp * (z - rp) * (z - rp) - 0.5 * geff * (f - rm) * (f - rm);
    logs_max = std::max(logs_max, lw[i]);
  }
  double m0 = 0, m1 = 0, m2 = 0, o1 = 0, o2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = lo + (i + 0.5) * h;
    const double f = ch.activation == Activation::relu ? std::max(z, 0.0) : z;
    const double wt = std::exp(lw[i] - logs_max);
    const double om = w * f + (1 - w) * rm;
    m0 += wt;
    m1 += wt * z;
    m2 += wt * z * z;
    o1 += wt * om;
    o2 += wt * om * om;
  }
  DenoiseResult r;
  r.mean_in = m1 / m0;
  r.var_in = m2 / m0 - r.mean_in * r.mean_in;
  r.mean_out = o1 / m0;
  r.var_out = o2 / m0 - r.mean_out * r.mean_out + s2 * w;
  return r;
}

void expect_close(const DenoiseResult& a, const DenoiseResult& b, double tol) {
  EXPECT_NEAR(a.mean_in, b.mean_in, tol * std::max(1.0, std::abs(b.mean_in)));
  EXPECT_NEAR(a.mean_out, b.mean_out, tol * std::max(1.0, std::abs(b.mean_out)));
  EXPECT_NEAR(a.var_in, b.var_in, tol * b.var_in + 1e-15);
  EXPECT_NEAR(a.var_out, b.var_out, tol * b.var_out + 1e-15);
}

}  // namespace

TEST(ScalarDenoiser, IdentityChannelIsTheExactGaussianPosterior) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2), lg(-1, 2);
  for (int i = 0; i < 50; ++i) {
    const double rp = u(rng), rm = u(rng), gp = std::pow(10, lg(rng)), gm = std::pow(10, lg(rng));
    const ScalarChannel ch{Activation::identity, 0.1};
    const DenoiseResult ref = identity_exact(0.1, rp, rm, gp, gm);
    for (auto method : {DenoiserMethod::closed_form, DenoiserMethod::quadrature}) {
      expect_close(denoise_middle(ch, rp, rm, gp, gm, method), ref, 1e-10);
    }
  }
}

TEST(ScalarDenoiser, ReluMatchesBruteForceIntegration) {
  struct Case {
    ScalarChannel ch;
    double rp, rm, gp, gm;
  };
  for (const Case& c : {Case{kRelu, 0.3, 0.5, 2.0, 3.0}, Case{kRelu, -1.0, 0.2, 1.0, 10.0},
                        Case{kRelu, 0.8, -0.4, 5.0, 1.0}, Case{kNoisyRelu, -0.2, 0.1, 1.5, 4.0},
                        Case{kNoisyRelu, 1.2, 1.0, 0.7, 0.5}}) {
    const DenoiseResult ref = brute_force(c.ch, c.rp, c.rm, c.gp, c.gm);
    expect_close(denoise_middle(c.ch, c.rp, c.rm, c.gp, c.gm), ref, 1e-6);
  }
}

TEST(ScalarDenoiser, ClosedFormAndQuadratureAgree) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3), lg(-2, 4);
  for (int i = 0; i < 400; ++i) {
    const ScalarChannel ch = i % 2 ? kRelu : kNoisyRelu;
    const double rp = u(rng), rm = u(rng), gp = std::pow(10, lg(rng)), gm = std::pow(10, lg(rng));
    const DenoiseResult a = denoise_middle(ch, rp, rm, gp, gm, DenoiserMethod::closed_form);
    const DenoiseResult b = denoise_middle(ch, rp, rm, gp, gm, DenoiserMethod::quadrature);
    expect_close(a, b, 1e-7);
  }
}

TEST(ScalarDenoiser, QuadratureSurvivesMessagesFarFromTheMass) {
  // Inputs of this size appear when the iteration runs away; the integral must still converge.
  for (double rp : {6476.35, -1190.4}) {
    const DenoiseResult a = denoise_middle(kRelu, rp, 1.23, 1.04, 1632.0, DenoiserMethod::closed_form);
    const DenoiseResult b = denoise_middle(kRelu, rp, 1.23, 1.04, 1632.0, DenoiserMethod::quadrature);
    expect_close(a, b, 1e-7);
  }
}

TEST(ScalarDenoiser, DivergenceIdentitiesHoldUnderFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5), lg(-0.5, 1.5);
  for (int i = 0; i < 100; ++i) {
    const ScalarChannel ch = i % 2 ? kRelu : kNoisyRelu;
    const double rp = u(rng), rm = u(rng), gp = std::pow(10, lg(rng)), gm = std::pow(10, lg(rng));
    const DenoiseResult d = denoise_middle(ch, rp, rm, gp, gm);
    const double h = 1e-5;
    const double dout = (denoise_middle(ch, rp, rm + h, gp, gm).mean_out -
                         denoise_middle(ch, rp, rm - h, gp, gm).mean_out) / (2 * h);
    const double din = (denoise_middle(ch, rp + h, rm, gp, gm).mean_in -
                        denoise_middle(ch, rp - h, rm, gp, gm).mean_in) / (2 * h);
    EXPECT_NEAR(dout, gm * d.var_out, 1e-4 * std::max(1.0, gm * d.var_out));
    EXPECT_NEAR(din, gp * d.var_in, 1e-4 * std::max(1.0, gp * d.var_in));
  }
}

TEST(ScalarDenoiser, UninformativeOutputMessageLeavesTheInputPrior) {
  const DenoiseResult d = denoise_middle(kRelu, 0.4, 123.0, 2.0, 0.0);
  EXPECT_NEAR(d.mean_in, 0.4, 1e-14);
  EXPECT_NEAR(d.var_in, 0.5, 1e-14);
  // E relu(N(0.4, 0.5)) by brute force.
  EXPECT_NEAR(d.mean_out, brute_force(kRelu, 0.4, 0.0, 2.0, 0.0).mean_out, 1e-8);
}

TEST(ScalarDenoiser, InputPriorPosterior) {
  const GaussianEstimate g = denoise_input(2.0, 3.0);
  EXPECT_DOUBLE_EQ(g.mean, 1.5);
  EXPECT_DOUBLE_EQ(g.var, 0.25);
  const GaussianEstimate flat = denoise_input(5.0, 0.0);
  EXPECT_DOUBLE_EQ(flat.mean, 0.0);
  EXPECT_DOUBLE_EQ(flat.var, 1.0);
}

TEST(ScalarDenoiser, ObservedNoiselessReluOutput) {
  const GaussianEstimate pos = denoise_output_nonlinear(kRelu, 0.7, -0.3, 2.0);
  EXPECT_DOUBLE_EQ(pos.mean, 0.7);
  EXPECT_LT(pos.var, 1e-12);
  // y = 0: the input is N(r, 1/gp) restricted to (-inf, 0].
  const GaussianEstimate zero = denoise_output_nonlinear(kRelu, 0.0, 0.5, 4.0);
  const double a = (0.0 - 0.5) * 2.0;  // standardized cut
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2 * M_PI);
  const double cdf = 0.5 * std::erfc(-a / std::sqrt(2.0));
  EXPECT_NEAR(zero.mean, 0.5 - 0.5 * phi / cdf, 1e-12);
  EXPECT_NEAR(zero.var, 0.25 * (1 - a * phi / cdf - (phi / cdf) * (phi / cdf)), 1e-12);
  EXPECT_THROW(denoise_output_nonlinear(kRelu, -0.1, 0.0, 1.0), NumericalError);
}

TEST(ScalarDenoiser, ObservedNoisyOutputMatchesBruteForce) {
  // With the output observed, the channel term is a Gaussian likelihood of phi(z_in).
  const double y = 0.6, rp = 0.1, gp = 2.0, s2 = 0.2;
  const DenoiseResult ref = brute_force({Activation::relu, 0.0}, rp, y, gp, 1.0 / s2);
  for (auto method : {DenoiserMethod::closed_form, DenoiserMethod::quadrature}) {
    const GaussianEstimate g = denoise_output_nonlinear({Activation::relu, s2}, y, rp, gp, method);
    EXPECT_NEAR(g.mean, ref.mean_in, 1e-7);
    EXPECT_NEAR(g.var, ref.var_in, 1e-7);
  }
}

TEST(ScalarDenoiser, InvalidInputsThrow) {
  EXPECT_THROW(denoise_middle(kRelu, NAN, 0.0, 1.0, 1.0), NumericalError);
  EXPECT_THROW(denoise_middle(kRelu, 0.0, 0.0, 0.0, 1.0), NumericalError);
  EXPECT_THROW(denoise_middle(kRelu, 0.0, 0.0, 1.0, INFINITY), ConfigError);
  EXPECT_THROW(denoise_middle({Activation::sigmoid_probit_reserved, 0.0}, 0.0, 0.0, 1.0, 1.0),
               ConfigError);
}

TEST(ScalarDenoiser, MonteCarloOracleAgreesWithTheExactGaussianCase) {
  const ScalarChannel ch{Activation::identity, 0.3};
  const DenoiseResult ref = identity_exact(0.3, 0.2, -0.5, 1.5, 2.0);
  const MonteCarloMoments mc = mc_oracle_moments(ch, 0.2, -0.5, 1.5, 2.0, 200000, 99);
  EXPECT_GT(mc.effective_samples, 1000.0);
  EXPECT_NEAR(mc.estimate.mean_in, ref.mean_in, 4 * mc.std_error.mean_in);
  EXPECT_NEAR(mc.estimate.mean_out, ref.mean_out, 4 * mc.std_error.mean_out);
  EXPECT_NEAR(mc.estimate.var_in, ref.var_in, 4 * mc.std_error.var_in);
  EXPECT_NEAR(mc.estimate.var_out, ref.var_out, 4 * mc.std_error.var_out);
  EXPECT_THROW(mc_oracle_moments(ch, 0.2, -0.5, 1.5, 2.0, 10, 1), ConfigError);
}

TEST(ScalarDenoiser, ChannelSecondMoment) {
  // E relu(P)^2 + noise for P ~ N(m, v), by brute force.
  const double m = 0.3, v = 0.8, s2 = 0.1;
  const int n = 400000;
  const double sd = std::sqrt(v), lo = m - 12 * sd, h = 24 * sd / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (i + 0.5) * h;
    const double f = std::max(x, 0.0);
    acc += f * f * std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2 * M_PI * v) * h;
  }
  EXPECT_NEAR(channel_output_second_moment({Activation::relu, s2}, m, v), acc + s2, 1e-9);
  EXPECT_NEAR(channel_output_second_moment({Activation::identity, 0.0}, m, v), m * m + v, 1e-14);
}
