#pragma once

#include "mlvamp/network.hpp"

#include <cstdint>
#include <vector>

namespace mlvamp {

// Negative log posterior of the input for a network whose hidden stages are deterministic
// and whose last stage is a linear measurement with finite noise precision nu:
//   H(z0) = nu/2 ||y - A f(z0) - b||^2 + 1/2 ||z0||^2   (additive constants dropped).
class HamiltonianContext {
 public:
  HamiltonianContext(const NetworkSpec& net, Vector y);

  const NetworkSpec& net() const { return *net_; }
  const Vector& y() const { return y_; }
  double nu() const { return nu_; }
  Index input_dim() const { return net_->input_dim(); }

  // z_0 .. z_{L-1} for a given input.
  std::vector<Vector> forward(const Vector& z0) const;

 private:
  const NetworkSpec* net_;
  Vector y_;
  double nu_;
};

double hamiltonian(const HamiltonianContext& ctx, const Vector& z0);

// Reverse-mode gradient through the chain; the ReLU subgradient at 0 is 0.
Vector grad_hamiltonian(const HamiltonianContext& ctx, const Vector& z0);

// Both at once, sharing the forward pass.
double hamiltonian_and_grad(const HamiltonianContext& ctx, const Vector& z0, Vector& grad);

struct MapOptions {
  int steps = 500;
  double step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Backtracking: a step that raises H is halved until it does not, or skipped.
  bool safeguard = false;
  double divergence_limit = 1e12;
};

struct MapResult {
  Vector z0;
  std::vector<double> loss_trace;  // H at the initializer, then after every step
};

// Adaptive-moment descent from z_init. Throws DivergenceError when H exceeds the limit.
MapResult map_estimate(const HamiltonianContext& ctx, const Vector& z_init, const MapOptions& opt = {});
// Starts from a draw of the N(0, I) prior.
MapResult map_estimate(const HamiltonianContext& ctx, std::uint64_t seed, const MapOptions& opt = {});

struct SgldOptions {
  int steps = 10000;
  double lambda = 0.002;
  int burn_in = 5000;
  bool inject_noise = true;  // false turns the chain into plain gradient descent
  bool keep_samples = false;
  double divergence_limit = 1e12;
};

struct SgldResult {
  std::vector<Vector> layer_means;  // posterior means of z_0 .. z_{L-1} over kept samples
  Vector z0_var;                    // per-coordinate sample variance of z_0
  std::vector<double> loss_trace;   // H after every step
  std::vector<Vector> samples;      // z_0 after every step, when requested
};

// z <- z - lambda grad H(z) + sqrt(2 lambda) w, w ~ N(0, I); averages after burn_in steps.
SgldResult sgld_run(const HamiltonianContext& ctx, const Vector& z_init, std::uint64_t seed,
                    const SgldOptions& opt = {});
SgldResult sgld_run(const HamiltonianContext& ctx, std::uint64_t seed, const SgldOptions& opt = {});

}  // namespace mlvamp
