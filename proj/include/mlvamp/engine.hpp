#pragma once

#include "mlvamp/kernels.hpp"
#include "mlvamp/network.hpp"
#include "mlvamp/scalar_denoiser.hpp"

#include <vector>

namespace mlvamp {

struct ClampLimits {
  double gamma_min = 1e-8;
  double gamma_max = 1e11;
  double alpha_min = 1e-6;  // alpha is kept in [alpha_min, 1 - alpha_min]
};

struct PrecisionStep {
  double eta = 0.0;
  double gamma_new = 0.0;
  double alpha = 0.0;
  int clamps = 0;  // number of limits that were hit
};

// eta = gamma_opp / alpha, gamma_new = eta - gamma_opp. After clamping, eta is reset to
// gamma_new + gamma_opp so the identity holds exactly.
PrecisionStep precision_update(double alpha, double gamma_opp, const ClampLimits& lim = {});

// Same update driven by the average posterior variance v = 1 / eta. With gamma_opp == 0 the
// incoming message is empty and the whole posterior precision becomes gamma_new.
PrecisionStep precision_from_variance(double avg_var, double gamma_opp, const ClampLimits& lim = {});

// (eta * z_hat - gamma_opp * r_opp) / gamma_new.
Vector extrinsic_mean(double eta, const Vector& z_hat, double gamma_opp, const Vector& r_opp,
                      double gamma_new, const kernels::KernelTable& k = kernels::active());

// 10 log10(||truth - estimate||^2 / ||truth||^2), clipped below at -200 dB.
double nmse_db(const Vector& truth, const Vector& estimate);

// Messages on layers 0..L-1.
struct MessageState {
  std::vector<Vector> r_plus;
  std::vector<Vector> r_minus;
  std::vector<double> gamma_plus;
  std::vector<double> gamma_minus;
  int k = 0;

  // r_minus = 0 and gamma_minus = 0 everywhere; r_plus/gamma_plus are set by the first pass.
  static MessageState initial(const NetworkSpec& net);
};

// One iteration k = one forward and one reverse half-iteration. Layer index l = 0..L-1.
struct IterationRecord {
  int k = 0;
  // Forward half-iteration: z_hat_plus[l] from stage l, eta_plus = gamma_plus + gamma_minus_in.
  std::vector<Vector> z_hat_plus;
  std::vector<double> eta_plus;
  std::vector<double> gamma_plus;
  std::vector<double> gamma_minus_in;
  std::vector<double> alpha_plus;
  // Reverse half-iteration: z_hat_minus[l] from stage l + 1, eta_minus = gamma_minus + gamma_plus.
  std::vector<Vector> z_hat_minus;
  std::vector<double> eta_minus;
  std::vector<double> gamma_minus;
  std::vector<double> alpha_minus;
  // Filled when the truth is known.
  std::vector<double> nmse_plus_db;
  std::vector<double> nmse_minus_db;
  int clamp_events_forward = 0;
  int clamp_events_reverse = 0;
};

struct EngineOptions {
  int max_iter = 50;
  ClampLimits limits;
  double damping = 1.0;  // weight on the new (gamma, r); 1 disables damping
  DenoiserMethod scalar_method = DenoiserMethod::closed_form;
  const std::vector<Vector>* truth = nullptr;  // z_0..z_L, for NMSE recording
  bool keep_estimates = true;                  // store z_hat vectors in the records
  const kernels::KernelTable* kernels = nullptr;
};

void forward_pass(const NetworkSpec& net, const Vector& y, MessageState& state,
                  IterationRecord& rec, const EngineOptions& opt = {});
void backward_pass(const NetworkSpec& net, const Vector& y, MessageState& state,
                   IterationRecord& rec, const EngineOptions& opt = {});

struct EngineResult {
  std::vector<IterationRecord> records;
  MessageState state;
  int clamp_events = 0;
};

EngineResult run(const NetworkSpec& net, const Vector& y, const EngineOptions& opt = {});

}  // namespace mlvamp
