#include "mlvamp/error.hpp"
#include "mlvamp/linear_denoiser.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mlvamp;

namespace {

struct Shape {
  Index n_out, n_in, rank;
};

Matrix random_weight(std::mt19937_64& rng, const Shape& sh) {
  if (sh.rank >= std::min(sh.n_out, sh.n_in)) return oracle::random_gaussian(rng, sh.n_out, sh.n_in);
  return oracle::random_gaussian(rng, sh.n_out, sh.rank) * oracle::random_gaussian(rng, sh.rank, sh.n_in);
}

const Shape kShapes[] = {{7, 4, 4}, {4, 7, 4}, {6, 6, 6}, {9, 8, 3}, {5, 11, 2}};

double avg(const Vector& v) { return v.sum() / static_cast<double>(v.size()); }

}  // namespace

TEST(LinearDenoiser, FiniteNoiseMatchesTheDenseJointPosterior) {
  std::mt19937_64 rng(1);
  for (const Shape& sh : kShapes) {
    for (double gm : {0.0, 0.3, 5.0}) {
      const Matrix w = random_weight(rng, sh);
      const Vector b = oracle::random_vector(rng, sh.n_out);
      const Vector rp = oracle::random_vector(rng, sh.n_in), rm = oracle::random_vector(rng, sh.n_out);
      const double nu = 4.0, gp = 1.7;
      const LinearStage st = svd_decompose_stage(w, b, nu);
      const LinearEstimate e = denoise_linear(st, rp, rm, gp, gm);
      const oracle::StagePosterior ref = oracle::dense_stage(w, b, nu, rp, gp, rm, gm);
      EXPECT_LT(oracle::rel_err(e.z_hat_minus, ref.mean_in), 1e-10);
      EXPECT_LT(oracle::rel_err(e.z_hat_plus, ref.mean_out), 1e-10);
      EXPECT_NEAR(e.avg_var_in, avg(ref.var_in), 1e-10);
      EXPECT_NEAR(e.avg_var_out, avg(ref.var_out), 1e-10);
    }
  }
}

TEST(LinearDenoiser, DeterministicStageMatchesTheConstrainedPosterior) {
  std::mt19937_64 rng(2);
  for (const Shape& sh : kShapes) {
    const Matrix w = random_weight(rng, sh);
    const Vector b = oracle::random_vector(rng, sh.n_out);
    const Vector rp = oracle::random_vector(rng, sh.n_in), rm = oracle::random_vector(rng, sh.n_out);
    const LinearStage st = svd_decompose_stage(w, b, kInf);
    const LinearEstimate e = denoise_linear(st, rp, rm, 0.8, 2.5);
    const oracle::StagePosterior ref = oracle::constrained_stage(w, b, rp, 0.8, rm, 2.5);
    EXPECT_LT(oracle::rel_err(e.z_hat_minus, ref.mean_in), 1e-10);
    EXPECT_LT(oracle::rel_err(e.z_hat_plus, ref.mean_out), 1e-10);
    EXPECT_NEAR(e.avg_var_in, avg(ref.var_in), 1e-10);
    EXPECT_NEAR(e.avg_var_out, avg(ref.var_out), 1e-10);
  }
}

TEST(LinearDenoiser, ObservedOutputMatchesTheDenseRegression) {
  std::mt19937_64 rng(3);
  for (const Shape& sh : kShapes) {
    const Matrix w = random_weight(rng, sh);
    const Vector b = oracle::random_vector(rng, sh.n_out);
    const Vector rp = oracle::random_vector(rng, sh.n_in), y = oracle::random_vector(rng, sh.n_out);
    const LinearStage st = svd_decompose_stage(w, b, 30.0);
    const ObservedEstimate e = denoise_linear_observed(st, y, rp, 1.3);
    const oracle::StagePosterior ref = oracle::observed_stage(w, b, 30.0, y, rp, 1.3);
    EXPECT_LT(oracle::rel_err(e.z_hat_minus, ref.mean_in), 1e-10);
    EXPECT_NEAR(e.avg_var_in, avg(ref.var_in), 1e-10);
    EXPECT_NEAR(e.alpha_minus, 1.3 * avg(ref.var_in), 1e-10);
  }
}

TEST(LinearDenoiser, AlphaIsTheAverageDivergence) {
  std::mt19937_64 rng(4);
  for (double nu : {2.0, kInf}) {
    const Shape sh{6, 5, 5};
    const Matrix w = random_weight(rng, sh);
    const Vector b = oracle::random_vector(rng, 6);
    const Vector rp = oracle::random_vector(rng, 5), rm = oracle::random_vector(rng, 6);
    const LinearStage st = svd_decompose_stage(w, b, nu);
    const double gp = 0.9, gm = 1.6, h = 1e-4;
    const LinearEstimate e = denoise_linear(st, rp, rm, gp, gm);
    double div_in = 0.0, div_out = 0.0;
    for (Index i = 0; i < 5; ++i) {
      Vector a = rp, c = rp;
      a(i) += h;
      c(i) -= h;
      div_in += (denoise_linear(st, a, rm, gp, gm).z_hat_minus(i) -
                 denoise_linear(st, c, rm, gp, gm).z_hat_minus(i)) / (2 * h);
    }
    for (Index i = 0; i < 6; ++i) {
      Vector a = rm, c = rm;
      a(i) += h;
      c(i) -= h;
      div_out += (denoise_linear(st, rp, a, gp, gm).z_hat_plus(i) -
                  denoise_linear(st, rp, c, gp, gm).z_hat_plus(i)) / (2 * h);
    }
    EXPECT_NEAR(e.alpha_minus, div_in / 5, 1e-8);
    EXPECT_NEAR(e.alpha_plus, div_out / 6, 1e-8);
  }
}

TEST(LinearDenoiser, ComponentSolveMatchesTheTwoByTwoSystem) {
  const double ui = 0.4, uo = -1.1, s = 1.7, bb = 0.2, gp = 2.0, gm = 3.0, nu = 5.0;
  Eigen::Matrix2d j;
  j << gp + nu * s * s, -nu * s, -nu * s, gm + nu;
  const Eigen::Matrix2d c = j.inverse();
  const Eigen::Vector2d m = c * Eigen::Vector2d(gp * ui - nu * s * bb, gm * uo + nu * bb);
  const ComponentSolve cs = component_solve(ui, uo, s, bb, gp, gm, nu);
  EXPECT_NEAR(cs.g_minus, m(0), 1e-13);
  EXPECT_NEAR(cs.g_plus, m(1), 1e-13);
  EXPECT_NEAR(cs.var_in, c(0, 0), 1e-13);
  EXPECT_NEAR(cs.var_out, c(1, 1), 1e-13);
  EXPECT_NEAR(cs.d_minus, gp * c(0, 0), 1e-13);
  EXPECT_NEAR(cs.d_plus, gm * c(1, 1), 1e-13);
}

TEST(LinearDenoiser, BadInputsThrow) {
  std::mt19937_64 rng(5);
  const LinearStage st = svd_decompose_stage(oracle::random_gaussian(rng, 3, 2), Vector::Zero(3), kInf);
  EXPECT_THROW(denoise_linear(st, Vector::Zero(3), Vector::Zero(3), 1.0, 1.0), DimensionError);
  EXPECT_THROW(denoise_linear(st, Vector::Zero(2), Vector::Zero(3), 0.0, 1.0), NumericalError);
  EXPECT_THROW(denoise_linear(st, Vector::Zero(2), Vector::Zero(3), 1.0, -1.0), NumericalError);
  EXPECT_THROW(denoise_linear_observed(st, Vector::Zero(3), Vector::Zero(2), 1.0), ConfigError);
}
