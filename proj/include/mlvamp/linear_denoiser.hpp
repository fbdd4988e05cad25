#pragma once

#include "mlvamp/kernels.hpp"
#include "mlvamp/network.hpp"

namespace mlvamp {

// One transformed component of a linear stage.
struct ComponentSolve {
  double g_minus = 0.0;  // estimate of the input-side coordinate
  double g_plus = 0.0;   // estimate of the output-side coordinate
  double d_plus = 0.0;   // derivative of g_plus w.r.t. u_out
  double d_minus = 0.0;  // derivative of g_minus w.r.t. u_in
  double var_in = 0.0;
  double var_out = 0.0;
};

// Minimizer of gp/2 (x - u_in)^2 + gm/2 (y - u_out)^2 + nu/2 (y - s x - b_bar)^2; nu = +inf
// enforces y = s x + b_bar. gm == 0 is allowed.
ComponentSolve component_solve(double u_in, double u_out, double s, double b_bar,
                               double gamma_plus, double gamma_minus, double nu);

struct LinearEstimate {
  Vector z_hat_minus;  // estimate of the stage input
  Vector z_hat_plus;   // estimate of the stage output
  double alpha_minus = 0.0;
  double alpha_plus = 0.0;
  double avg_var_in = 0.0;   // mean posterior variance over input coordinates
  double avg_var_out = 0.0;  // mean posterior variance over output coordinates
};

LinearEstimate denoise_linear(const LinearStage& stage, const Vector& r_plus, const Vector& r_minus,
                              double gamma_plus, double gamma_minus,
                              const kernels::KernelTable& k = kernels::active());

struct ObservedEstimate {
  Vector z_hat_minus;
  double alpha_minus = 0.0;
  double avg_var_in = 0.0;
};

// Posterior of the stage input when its output y is observed (finite nu only).
ObservedEstimate denoise_linear_observed(const LinearStage& stage, const Vector& y,
                                         const Vector& r_plus, double gamma_plus,
                                         const kernels::KernelTable& k = kernels::active());

}  // namespace mlvamp
