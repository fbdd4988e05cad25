#include "mlvamp/engine.hpp"
#include "mlvamp/error.hpp"
#include "mlvamp/linear_denoiser.hpp"
#include "mlvamp/state_evolution.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mlvamp;

TEST(StateEvolution, InputError) {
  EXPECT_DOUBLE_EQ(error_input(0.0), 1.0);
  EXPECT_DOUBLE_EQ(error_input(3.0), 0.25);
}

TEST(StateEvolution, LinearErrorEqualsTheDenoiserVariance) {
  // Linear-stage posterior variances do not depend on the data.
  std::mt19937_64 rng(1);
  for (double nu : {5.0, kInf}) {
    const LinearStage st =
        svd_decompose_stage(oracle::random_gaussian(rng, 9, 6), oracle::random_vector(rng, 9), nu);
    NetworkSpec net;
    LayerStatistics ls;
    ls.s = st.s;
    ls.n_in = st.n_in();
    ls.n_out = st.n_out();
    ls.nu = nu;
    const Vector rp = oracle::random_vector(rng, 6), rm = oracle::random_vector(rng, 9);
    const LinearEstimate e = denoise_linear(st, rp, rm, 1.4, 0.6);
    const ErrorPair ep = error_linear(ls, 1.4, 0.6);
    EXPECT_NEAR(ep.e_minus, e.avg_var_in, 1e-13);
    EXPECT_NEAR(ep.e_plus, e.avg_var_out, 1e-13);
    if (nu != kInf) {
      const ObservedEstimate o = denoise_linear_observed(st, rm, rp, 1.4);
      EXPECT_NEAR(error_linear(ls, 1.4, kInf).e_minus, o.avg_var_in, 1e-13);
    }
  }
}

namespace {

// Monte Carlo of the matched model: R+ ~ N(mean, c - 1/gp), Z_in = R+ + N(0, 1/gp),
// Z_out = phi(Z_in) + xi, R- = Z_out + N(0, 1/gm).
struct McError {
  double e_plus, e_minus, se_plus, se_minus;
};

McError mc_nonlinear(const ScalarChannel& ch, double gp, double gm, double tau, double mean, int n,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const double c = tau - mean * mean;
  const double v = std::max(0.0, c - 1.0 / gp);
  double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
  for (int i = 0; i < n; ++i) {
    const double rp = mean + std::sqrt(v) * nd(rng);
    const double zin = rp + nd(rng) / std::sqrt(gp);
    const double zout = apply_activation(ch.activation, zin) + std::sqrt(ch.noise_var) * nd(rng);
    const double rm = zout + nd(rng) / std::sqrt(gm);
    const DenoiseResult d = denoise_middle(ch, rp, rm, gp, gm);
    s1 += d.var_out;
    s2 += d.var_out * d.var_out;
    t1 += d.var_in;
    t2 += d.var_in * d.var_in;
  }
  const double mo = s1 / n, mi = t1 / n;
  return {mo, mi, std::sqrt(std::max(0.0, s2 / n - mo * mo) / n), std::sqrt(std::max(0.0, t2 / n - mi * mi) / n)};
}

}  // namespace

TEST(StateEvolution, NonlinearErrorMatchesMonteCarlo) {
  struct Case {
    ScalarChannel ch;
    double gp, gm, tau, mean;
  };
  const Case cases[] = {{{Activation::relu, 0.0}, 2.0, 3.0, 1.2, 0.3},
                        {{Activation::relu, 0.0}, 0.9, 20.0, 2.0, -0.5},
                        {{Activation::relu, 0.05}, 5.0, 1.0, 1.0, 0.0},
                        {{Activation::identity, 0.1}, 1.5, 2.5, 1.0, 0.2}};
  std::uint64_t seed = 10;
  for (const Case& c : cases) {
    const ErrorPair ep = error_nonlinear(c.ch, c.gp, c.gm, c.tau, c.mean);
    const McError mc = mc_nonlinear(c.ch, c.gp, c.gm, c.tau, c.mean, 200000, seed++);
    EXPECT_NEAR(ep.e_plus, mc.e_plus, 4 * mc.se_plus + 1e-10);
    EXPECT_NEAR(ep.e_minus, mc.e_minus, 4 * mc.se_minus + 1e-10);
    EXPECT_FALSE(ep.clamped);
  }
}

TEST(StateEvolution, SecondMomentsMatchSampledTrajectories) {
  SyntheticConfig cfg;
  cfg.dims = {50, 600, 600};
  cfg.n_meas = 500;
  cfg.seed = 3;
  const NetworkSpec net = build_synthetic_network(cfg);
  const LayerMoments m = compute_tau0(extract_statistics(net));
  std::vector<double> emp(m.tau.size(), 0.0);
  const int n = 40;
  for (int t = 0; t < n; ++t) {
    const Trajectory tr = sample_trajectory(net, 500 + t);
    for (std::size_t l = 0; l < emp.size(); ++l) emp[l] += tr.z[l].squaredNorm() / tr.z[l].size() / n;
  }
  for (std::size_t l = 0; l < emp.size(); ++l) EXPECT_NEAR(emp[l] / m.tau[l], 1.0, 0.05) << l;
}

TEST(StateEvolution, GaussianChainPrecisionsMatchTheEngine) {
  // Every stage of a Gaussian chain has a data-independent posterior variance, so the
  // recursion and the engine must produce the same precisions.
  GaussianChainConfig g;
  g.dims = {6, 9, 7};
  g.n_meas = 5;
  g.nu_hidden = 15.0;
  g.identity_noise_var = 0.05;
  g.nu_meas = 25.0;
  const NetworkSpec net = build_gaussian_chain(g);
  const Trajectory tr = sample_trajectory(net, 2);
  EngineOptions eo;
  eo.max_iter = 15;
  const EngineResult er = run(net, tr.output(), eo);
  SEOptions so;
  so.n_iter = 15;
  const SEState se = run_se(extract_statistics(net), so);
  for (int k = 0; k < 15; ++k) {
    for (int l = 0; l < net.num_stages(); ++l) {
      EXPECT_NEAR(se.iterations[k].eta_plus[l] / er.records[k].eta_plus[l], 1.0, 1e-9);
      EXPECT_NEAR(se.iterations[k].eta_minus[l] / er.records[k].eta_minus[l], 1.0, 1e-9);
    }
  }
}

TEST(StateEvolution, RecursionOnTheSyntheticNetworkIsWellBehaved) {
  SyntheticConfig cfg;
  cfg.dims = {10, 40, 60};
  cfg.n_meas = 30;
  const SEState se = run_se(extract_statistics(build_synthetic_network(cfg)), SEOptions{40});
  ASSERT_EQ(se.iterations.size(), 40u);
  EXPECT_EQ(se.num_layers(), 5);
  for (const auto& it : se.iterations) {
    for (int l = 0; l < 5; ++l) {
      EXPECT_NEAR(it.eta_plus[l], it.gamma_plus[l] + it.gamma_minus_in[l], 1e-9 * it.eta_plus[l]);
      EXPECT_NEAR(it.eta_minus[l], it.gamma_minus[l] + it.gamma_plus[l], 1e-9 * it.eta_minus[l]);
    }
  }
  // Predicted input error falls below the prior and settles.
  EXPECT_LT(predicted_nmse_db(se, 0, 79), -3.0);
  EXPECT_NEAR(predicted_nmse_db(se, 0, 79), predicted_nmse_db(se, 0, 77), 0.05);
  EXPECT_THROW(predicted_nmse_db(se, 0, 80), ConfigError);
  EXPECT_THROW(predicted_nmse_db(se, 5, 0), ConfigError);
  EXPECT_THROW(run_se(extract_statistics(build_synthetic_network(cfg)), SEOptions{0}), ConfigError);
}

TEST(StateEvolution, ErrorsDoNotIncreaseWithMorePrecision) {
  const ScalarChannel relu{Activation::relu, 0.0};
  const std::vector<double> grid{0.1, 0.3, 1.0, 3.0, 10.0, 30.0};
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    for (double other : {0.5, 5.0}) {
      const ErrorPair a = error_nonlinear(relu, grid[i], other, 1.5, 0.4);
      const ErrorPair b = error_nonlinear(relu, grid[i + 1], other, 1.5, 0.4);
      EXPECT_LE(b.e_plus, a.e_plus * (1 + 1e-9));
      EXPECT_LE(b.e_minus, a.e_minus * (1 + 1e-9));
      const ErrorPair c = error_nonlinear(relu, other, grid[i], 1.5, 0.4);
      const ErrorPair d = error_nonlinear(relu, other, grid[i + 1], 1.5, 0.4);
      EXPECT_LE(d.e_plus, c.e_plus * (1 + 1e-9));
      EXPECT_LE(d.e_minus, c.e_minus * (1 + 1e-9));
    }
  }
  std::mt19937_64 rng(8);
  const LinearStage st = svd_decompose_stage(oracle::random_gaussian(rng, 12, 9), Vector::Zero(12), 4.0);
  LayerStatistics ls;
  ls.s = st.s;
  ls.n_in = 9;
  ls.n_out = 12;
  ls.nu = 4.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    EXPECT_LE(error_linear(ls, grid[i + 1], 1.0).e_minus, error_linear(ls, grid[i], 1.0).e_minus);
    EXPECT_LE(error_linear(ls, grid[i + 1], 1.0).e_plus, error_linear(ls, grid[i], 1.0).e_plus);
    EXPECT_LE(error_linear(ls, 1.0, grid[i + 1]).e_minus, error_linear(ls, 1.0, grid[i]).e_minus);
    EXPECT_LE(error_linear(ls, 1.0, grid[i + 1]).e_plus, error_linear(ls, 1.0, grid[i]).e_plus);
  }
}
