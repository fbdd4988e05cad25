#pragma once

#include "mlvamp/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mlvamp {

enum class Activation {
  relu,
  identity,
  // Name reserved for a probit-approximated sigmoid output; no denoiser exists for it.
  sigmoid_probit_reserved,
};

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

double apply_activation(Activation a, double x);

// phi(z) = slope * z + intercept on (lo, hi).
struct AffinePiece {
  double lo;
  double hi;
  double slope;
  double intercept;
};

// The activation as a list of affine pieces covering the real line in increasing order.
// Throws ConfigError for activations that are not piecewise affine.
const std::vector<AffinePiece>& affine_pieces(Activation a);

// z_out = phi(z_in) + xi with xi ~ N(0, noise_var); noise_var == 0 means a deterministic stage.
struct NonlinearStage {
  Activation activation = Activation::relu;
  double noise_var = 0.0;
};

// Linear stage z_out = W z_in + b + xi, xi ~ N(0, I / nu), held in factored form
// W = v_out * Sigma * v_in with Sigma = [diag(s) 0; 0 0] of shape n_out x n_in.
// nu == +inf marks a deterministic stage.
struct LinearStage {
  Matrix v_out;  // n_out x n_out, orthogonal
  Matrix v_in;   // n_in x n_in, orthogonal
  Vector s;      // rank() nonnegative singular values
  Vector b;      // n_out
  Vector b_bar;  // v_out^T b
  double nu = kInf;

  Index n_in() const { return v_in.rows(); }
  Index n_out() const { return v_out.rows(); }
  Index rank() const { return s.size(); }
  bool deterministic() const { return nu == kInf; }

  // s zero-padded to the given length.
  Vector padded_s(Index n) const;

  Matrix dense() const;
  // W z (no bias, no noise).
  Vector apply(const Vector& z) const;
  // W^T d.
  Vector apply_transpose(const Vector& d) const;
};

using Stage = std::variant<LinearStage, NonlinearStage>;

// Parameters of the synthetic random network: input -> (linear, ReLU) x hidden -> measurement.
struct SyntheticConfig {
  std::vector<Index> dims{20, 100, 500, 784};  // input width followed by hidden widths
  double rho = 0.4;                            // fraction of positive hidden pre-activations
  double kappa = 10.0;                         // measurement condition number
  double snr_db = 30.0;
  Index n_meas = 300;
  std::uint64_t seed = 1;
  double bias_std = 0.5;
  int pilot_trajectories = 10;
};

// Fully linear-Gaussian chain: input -> (linear, identity) x hidden -> measurement, with
// Gaussian weights. Every posterior in it is Gaussian, which makes it the exactness testbed.
struct GaussianChainConfig {
  std::vector<Index> dims{8, 12, 10};  // input width followed by hidden widths
  Index n_meas = 6;
  double nu_hidden = kInf;          // noise precision of the hidden linear stages
  double identity_noise_var = 0.0;  // noise variance of the identity stages
  double nu_meas = 100.0;
  double bias_std = 0.3;
  std::uint64_t seed = 1;
};

// How a network was produced; lets serialization store a seed instead of orthogonal factors.
struct GeneratorInfo {
  std::string procedure;  // "synthetic-relu-v1"
  SyntheticConfig config;
};

struct NetworkSpec {
  std::vector<Index> dims;    // N_0 .. N_L
  std::vector<Stage> stages;  // stage l (1-based) lives at stages[l - 1]
  std::optional<GeneratorInfo> generator;
  std::vector<std::string> flags;  // metadata notes, e.g. rank-deficient measurement

  int num_stages() const { return static_cast<int>(stages.size()); }
  bool is_linear(int l) const { return std::holds_alternative<LinearStage>(stages.at(l - 1)); }
  const LinearStage& linear(int l) const { return std::get<LinearStage>(stages.at(l - 1)); }
  const NonlinearStage& nonlinear(int l) const {
    return std::get<NonlinearStage>(stages.at(l - 1));
  }
  Index input_dim() const { return dims.front(); }
  Index output_dim() const { return dims.back(); }

  // Throws ConfigError when dimensions disagree, stages do not alternate linear/nonlinear
  // starting with a linear stage, or factors are not orthogonal.
  void validate() const;
};

// One sampled realization z_0..z_L with the transformed truth p0/q0 per layer.
struct Trajectory {
  std::vector<Vector> z;
  std::vector<Vector> p0;
  std::vector<Vector> q0;

  const Vector& output() const { return z.back(); }
};

LinearStage svd_decompose_stage(const Matrix& w, const Vector& b, double nu);

NetworkSpec build_synthetic_network(const SyntheticConfig& config);
NetworkSpec build_gaussian_chain(const GaussianChainConfig& config);

Trajectory sample_trajectory(const NetworkSpec& net, std::uint64_t seed);

// Fills p0/q0 from z using the orthogonal factors of the adjacent linear stages.
void fill_transformed_truth(const NetworkSpec& net, Trajectory& traj);

// (1 / N_l) ||q0_l||^2 for l = 0..L.
std::vector<double> empirical_layer_moments(const Trajectory& traj);

// Maximum over stages of ||V^T V - I||_max.
double max_orthogonality_error(const NetworkSpec& net);

// Fraction of strictly positive entries of the pre-activation feeding each ReLU stage.
std::vector<double> positive_preactivation_fraction(const NetworkSpec& net, const Trajectory& traj);

}  // namespace mlvamp
