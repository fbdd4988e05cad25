#pragma once

#include "mlvamp/baselines.hpp"
#include "mlvamp/network.hpp"
#include "mlvamp/network_io.hpp"
#include "mlvamp/scalar_denoiser.hpp"
#include "mlvamp/state_evolution.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace mlvamp {

enum class NetworkKind { synthetic, gaussian_chain };

// Every default is the synthetic-network setup: dims [20,100,500,784], ReLU, rho 0.4,
// kappa 10, M = 300, 30 dB, 50 iterations, 10 trials.
struct ExperimentConfig {
  NetworkKind kind = NetworkKind::synthetic;
  SyntheticConfig network;
  GaussianChainConfig chain;
  std::vector<Index> n_meas{300};
  int n_iter = 50;
  int n_trials = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"mlvamp"};  // any of mlvamp, map, sgld
  MapOptions map;
  SgldOptions sgld;
  double damping = 1.0;
  DenoiserMethod scalar_method = DenoiserMethod::closed_form;
  SEQuadrature se_quadrature;
  bool timing = false;  // fill runtime_ms; off keeps the CSV byte-stable
  int threads = 0;      // 0 picks the hardware concurrency
  std::string out_dir;  // empty: nothing is written

  void validate() const;
};

ExperimentConfig preset_iteration_config();
ExperimentConfig preset_sweep_config();  // M = 100, 200, ..., 600
// Baselines on the synthetic network, with step settings that are stable there.
ExperimentConfig preset_baseline_config();

Json experiment_config_to_json(const ExperimentConfig& c);
// Keys absent from the document keep the values of `base`; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig base = {});

// Seeds shared by every method within a trial.
std::uint64_t network_seed(const ExperimentConfig& c, int trial);
std::uint64_t trajectory_seed(const ExperimentConfig& c, int trial);

// The network of one trial at measurement count m.
NetworkSpec build_trial_network(const ExperimentConfig& c, int trial, Index m);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// One CSV row. Missing values (NaN, or -1 for the integer fields) are written as empty cells.
struct ResultRow {
  int trial = -1;
  std::string method;
  int half_iter = -1;
  int layer = 0;
  double nmse_db = 0.0;
  double se_nmse_db = kMissing;
  double gamma_plus = kMissing;
  double gamma_minus = kMissing;
  int clamp_events = -1;
  double runtime_ms = kMissing;
};

inline constexpr const char* kCsvHeader =
    "trial,method,half_iter,layer,nmse_db,se_nmse_db,gamma_plus,gamma_minus,clamp_events,runtime_ms";

std::string rows_to_csv(const std::vector<ResultRow>& rows);

struct TrialFailure {
  Index n_meas = 0;
  int trial = 0;
  std::string method;
  std::string message;
};

// Layer-0 curves at one half-iteration, across trials.
struct CurvePoint {
  int half_iter = 0;
  int count = 0;  // trials contributing
  double sim_median = 0.0, sim_q1 = 0.0, sim_q3 = 0.0;
  double se_median = 0.0;
  double gap_db = 0.0;               // |sim_median - se_median|
  double per_trial_gap_median = 0.0;  // median over trials of |sim - se|
};

struct MethodSummary {
  std::string method;
  int count = 0;
  double final_median = 0.0, final_q1 = 0.0, final_q3 = 0.0;  // layer-0 final NMSE
};

struct MeasurementBlock {
  Index n_meas = 0;
  std::vector<ResultRow> rows;
  std::vector<CurvePoint> curve;  // one entry per half-iteration
  std::vector<MethodSummary> methods;
  double se_final = 0.0;  // median over trials of the SE final NMSE (reference network if none)
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MeasurementBlock> blocks;
  std::vector<TrialFailure> failures;
  long total_clamp_events = 0;
  double runtime_ms = 0.0;

  bool partial_failure() const { return !failures.empty(); }
};

// Median and quartiles by linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

ExperimentResult run_iteration_experiment(const ExperimentConfig& cfg);
ExperimentResult run_measurement_sweep(const ExperimentConfig& cfg);
ExperimentResult run_baseline_comparison(const ExperimentConfig& cfg);

Json result_summary_json(const ExperimentResult& r);

// CSV per measurement count plus summary.json into cfg.out_dir (created if needed).
// Returns the files written.
std::vector<std::string> write_experiment_outputs(const ExperimentResult& r, const std::string& stem);

// Rows in the CSV schema holding only SE predictions for one network.
std::vector<ResultRow> se_rows(const SEState& se, int trial = -1);

}  // namespace mlvamp
