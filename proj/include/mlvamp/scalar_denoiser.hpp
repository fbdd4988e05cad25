#pragma once

#include "mlvamp/network.hpp"

#include <cstdint>

namespace mlvamp {

// Componentwise channel z_out = phi(z_in) + xi, xi ~ N(0, noise_var).
struct ScalarChannel {
  Activation activation = Activation::relu;
  double noise_var = 0.0;

  static ScalarChannel from_stage(const NonlinearStage& st) { return {st.activation, st.noise_var}; }
};

// Posterior moments of (z_in, z_out) under the scalar belief
//   b(z_in, z_out) ~ p(z_out | z_in) N(z_in; r_plus, 1/gamma_plus) N(z_out; r_minus, 1/gamma_minus).
struct DenoiseResult {
  double mean_in = 0.0;
  double mean_out = 0.0;
  double var_in = 0.0;
  double var_out = 0.0;
};

enum class DenoiserMethod {
  closed_form,  // exact truncated-Gaussian mixture over the affine pieces of phi
  quadrature,   // adaptive numerical integration over z_in, split at the kinks of phi
};

struct GaussianEstimate {
  double mean = 0.0;
  double var = 0.0;
};

// gamma_minus == 0 drops the r_minus term (uninformative message).
// gamma_minus == +inf treats r_minus as the observed output (needs noise_var > 0).
DenoiseResult denoise_middle(const ScalarChannel& ch, double r_plus, double r_minus,
                             double gamma_plus, double gamma_minus,
                             DenoiserMethod method = DenoiserMethod::closed_form);

// Posterior of a standard Gaussian input given the pseudo-observation N(z; r_minus, 1/gamma_minus).
GaussianEstimate denoise_input(double r_minus, double gamma_minus);

// Posterior of z_{L-1} when the nonlinear stage output y is observed.
GaussianEstimate denoise_output_nonlinear(const ScalarChannel& ch, double y, double r_plus,
                                          double gamma_plus,
                                          DenoiserMethod method = DenoiserMethod::closed_form);

// Self-normalized importance-sampling estimate of the denoise_middle moments, with standard
// errors. Independent of both deterministic evaluation paths.
struct MonteCarloMoments {
  DenoiseResult estimate;
  DenoiseResult std_error;
  double effective_samples = 0.0;
};

MonteCarloMoments mc_oracle_moments(const ScalarChannel& ch, double r_plus, double r_minus,
                                    double gamma_plus, double gamma_minus, long n_samples,
                                    std::uint64_t seed);

// E[(phi(P) + xi)^2] for P ~ N(mean, var).
double channel_output_second_moment(const ScalarChannel& ch, double mean, double var);

}  // namespace mlvamp
