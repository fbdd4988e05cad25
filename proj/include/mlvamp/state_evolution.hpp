#pragma once

#include "mlvamp/engine.hpp"
#include "mlvamp/network.hpp"
#include "mlvamp/scalar_denoiser.hpp"

#include <string>
#include <vector>

namespace mlvamp {

// What the recursion needs from each stage l = 1..L.
struct LayerStatistics {
  bool linear = true;
  // Linear stages.
  Vector s;              // nonzero part of the padded singular values
  Index n_in = 0;
  Index n_out = 0;
  double nu = kInf;
  double bias_sq = 0.0;    // ||b||^2 / n_out
  double bias_mean = 0.0;  // mean of b; the stage output is N(bias_mean, tau - bias_mean^2)
  // Nonlinear stages.
  ScalarChannel channel;
};

struct NetworkStatistics {
  double input_second_moment = 1.0;
  std::vector<LayerStatistics> stages;  // stage l at stages[l - 1]

  int num_stages() const { return static_cast<int>(stages.size()); }
};

NetworkStatistics extract_statistics(const NetworkSpec& net);

// Second moment tau_l and mean of every layer l = 0..L.
struct LayerMoments {
  std::vector<double> tau;
  std::vector<double> mean;
};
LayerMoments compute_tau0(const NetworkStatistics& stats);

// Node counts for the expectations over (R+, R-). The outer integral runs over the stage
// input, split at the kinks of the activation; the inner ones are Gauss-Hermite.
struct SEQuadrature {
  int outer_nodes = 8;      // Gauss-Legendre nodes per outer panel
  int grading_levels = 12;  // outer panels halve in width this many times toward a kink
  int inner_nodes = 12;     // Gauss-Hermite nodes per message
  double window_sds = 10.0;
};

struct ErrorPair {
  double e_plus = 0.0;   // output-side error variance
  double e_minus = 0.0;  // input-side error variance
  bool clamped = false;  // tau - mean^2 - 1/gamma_plus was negative and set to 0
};

// Nonlinear stage with input second moment tau_prev and input mean mean_prev.
// gamma_minus == +inf means the output is observed (the R- term is the output itself).
ErrorPair error_nonlinear(const ScalarChannel& ch, double gamma_plus, double gamma_minus,
                          double tau_prev, double mean_prev, const SEQuadrature& q = {});

// Linear stage; the observed variant (gamma_minus == +inf) fixes the output to y.
ErrorPair error_linear(const LayerStatistics& st, double gamma_plus, double gamma_minus);

// Input prior N(0, 1) with pseudo-observation precision gamma_minus.
double error_input(double gamma_minus);

struct SEIteration {
  int k = 0;
  std::vector<double> eta_plus, gamma_plus, gamma_minus_in, alpha_plus;
  std::vector<double> eta_minus, gamma_minus, alpha_minus;
  int clamp_events = 0;
  int variance_clamps = 0;
};

struct SEOptions {
  int n_iter = 50;
  ClampLimits limits;
  SEQuadrature quadrature;
};

struct SEState {
  std::vector<double> tau0;
  std::vector<double> mean0;
  std::vector<SEIteration> iterations;
  int clamp_events = 0;
  int variance_clamps = 0;

  int num_layers() const { return static_cast<int>(tau0.size()) - 1; }  // L
};

SEState run_se(const NetworkStatistics& stats, const SEOptions& opt = {});

// 10 log10((1 / eta) / tau0_l); half_iter 2k is the forward pass of iteration k, 2k + 1 the reverse.
double predicted_nmse_db(const SEState& se, int layer, int half_iter);

std::string se_to_json(const SEState& se);

}  // namespace mlvamp
