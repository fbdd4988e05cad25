#include "mlvamp/experiment.hpp"

#include "mlvamp/engine.hpp"
#include "mlvamp/error.hpp"
#include "mlvamp/random.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <mutex>
#include <thread>

namespace mlvamp {

namespace {

const std::vector<std::string> kKnownMethods{"mlvamp", "map", "sgld"};

bool has_method(const ExperimentConfig& c, const std::string& m) {
  return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

void put_double(std::string& out, double x) {
  if (std::isnan(x)) return;
  if (std::isinf(x)) {
    out += x > 0 ? "inf" : "-inf";
    return;
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

void put_int(std::string& out, long x, bool missing) {
  if (!missing) out += std::to_string(x);
}

void put_string(std::string& out, const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    out += s;
    return;
  }
  out += '"';
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
}

// Everything one trial produces at one measurement count.
struct TrialOutput {
  std::vector<ResultRow> rows;
  std::vector<TrialFailure> failures;
  long clamp_events = 0;
  double se_final = kMissing;  // layer 0, last half-iteration
};

TrialOutput run_trial(const ExperimentConfig& cfg, Index m, int t) {
  TrialOutput out;
  auto fail = [&](const std::string& method, const std::string& msg) {
    out.failures.push_back({m, t, method, msg});
  };
  NetworkSpec net;
  Trajectory traj;
  try {
    net = build_trial_network(cfg, t, m);
    traj = sample_trajectory(net, trajectory_seed(cfg, t));
  } catch (const Error& e) {
    for (const auto& method : cfg.methods) fail(method, e.what());
    return out;
  }
  const int L = net.num_stages();
  const Vector& y = traj.output();

  std::vector<std::vector<double>> se_pred;  // [half_iter][layer]
  try {
    SEOptions so;
    so.n_iter = cfg.n_iter;
    so.quadrature = cfg.se_quadrature;
    const SEState se = run_se(extract_statistics(net), so);
    se_pred.assign(2 * cfg.n_iter, std::vector<double>(L));
    for (int h = 0; h < 2 * cfg.n_iter; ++h) {
      for (int l = 0; l < L; ++l) se_pred[h][l] = predicted_nmse_db(se, l, h);
    }
    out.se_final = se_pred.back()[0];
  } catch (const Error& e) {
    fail("se", e.what());
  }

  if (has_method(cfg, "mlvamp")) {
    try {
      const auto start = std::chrono::steady_clock::now();
      EngineOptions opt;
      opt.max_iter = cfg.n_iter;
      opt.damping = cfg.damping;
      opt.scalar_method = cfg.scalar_method;
      opt.truth = &traj.z;
      opt.keep_estimates = false;
      const EngineResult res = run(net, y, opt);
      const double ms = cfg.timing ? elapsed_ms(start) : kMissing;
      out.clamp_events += res.clamp_events;
      for (int h = 0; h < 2 * cfg.n_iter; ++h) {
        const IterationRecord& rec = res.records[h / 2];
        const bool fwd = h % 2 == 0;
        for (int l = 0; l < L; ++l) {
          ResultRow r;
          r.trial = t;
          r.method = "mlvamp";
          r.half_iter = h;
          r.layer = l;
          r.nmse_db = fwd ? rec.nmse_plus_db[l] : rec.nmse_minus_db[l];
          if (!se_pred.empty()) r.se_nmse_db = se_pred[h][l];
          r.gamma_plus = rec.gamma_plus[l];
          r.gamma_minus = fwd ? rec.gamma_minus_in[l] : rec.gamma_minus[l];
          r.clamp_events = fwd ? rec.clamp_events_forward : rec.clamp_events_reverse;
          r.runtime_ms = ms;
          out.rows.push_back(std::move(r));
        }
      }
    } catch (const Error& e) {
      fail("mlvamp", e.what());
    }
  }

  auto baseline_rows = [&](const std::string& method, const std::vector<Vector>& layers, double ms) {
    for (int l = 0; l < L; ++l) {
      ResultRow r;
      r.trial = t;
      r.method = method;
      r.layer = l;
      r.nmse_db = nmse_db(traj.z[l], layers[l]);
      r.runtime_ms = ms;
      out.rows.push_back(std::move(r));
    }
  };
  if (has_method(cfg, "map")) {
    try {
      const auto start = std::chrono::steady_clock::now();
      const HamiltonianContext ctx(net, y);
      const MapResult res = map_estimate(ctx, derive_seed(cfg.seed, "map", t), cfg.map);
      baseline_rows("map", ctx.forward(res.z0), cfg.timing ? elapsed_ms(start) : kMissing);
    } catch (const Error& e) {
      fail("map", e.what());
    }
  }
  if (has_method(cfg, "sgld")) {
    try {
      const auto start = std::chrono::steady_clock::now();
      const HamiltonianContext ctx(net, y);
      const SgldResult res = sgld_run(ctx, derive_seed(cfg.seed, "sgld", t), cfg.sgld);
      baseline_rows("sgld", res.layer_means, cfg.timing ? elapsed_ms(start) : kMissing);
    } catch (const Error& e) {
      fail("sgld", e.what());
    }
  }
  return out;
}

void summarize(const ExperimentConfig& cfg, MeasurementBlock& b, std::vector<double> se_finals) {
  const int last = 2 * cfg.n_iter - 1;
  // Layer-0 curves keyed by half-iteration.
  std::map<int, std::vector<double>> sim, se, gap;
  std::map<std::string, std::vector<double>> finals;
  for (const ResultRow& r : b.rows) {
    if (r.layer != 0) continue;
    if (r.method == "mlvamp") {
      sim[r.half_iter].push_back(r.nmse_db);
      if (!std::isnan(r.se_nmse_db)) {
        se[r.half_iter].push_back(r.se_nmse_db);
        gap[r.half_iter].push_back(std::abs(r.nmse_db - r.se_nmse_db));
      }
      if (r.half_iter == last) finals["mlvamp"].push_back(r.nmse_db);
    } else if (r.method == "se") {
      se[r.half_iter].push_back(r.se_nmse_db);
    } else {
      finals[r.method].push_back(r.nmse_db);
    }
  }
  for (int h = 0; h <= last; ++h) {
    CurvePoint p;
    p.half_iter = h;
    const auto& s = sim[h];
    p.count = static_cast<int>(s.size());
    p.sim_median = s.empty() ? kMissing : median(s);
    p.sim_q1 = s.empty() ? kMissing : quantile(s, 0.25);
    p.sim_q3 = s.empty() ? kMissing : quantile(s, 0.75);
    p.se_median = se[h].empty() ? kMissing : median(se[h]);
    p.gap_db = std::abs(p.sim_median - p.se_median);
    p.per_trial_gap_median = gap[h].empty() ? kMissing : median(gap[h]);
    b.curve.push_back(p);
  }
  if (se_finals.empty() && !se[last].empty()) se_finals = se[last];
  b.se_final = se_finals.empty() ? kMissing : median(se_finals);
  for (const auto& method : cfg.methods) {
    MethodSummary ms;
    ms.method = method;
    const auto& v = finals[method];
    ms.count = static_cast<int>(v.size());
    ms.final_median = v.empty() ? kMissing : median(v);
    ms.final_q1 = v.empty() ? kMissing : quantile(v, 0.25);
    ms.final_q3 = v.empty() ? kMissing : quantile(v, 0.75);
    b.methods.push_back(ms);
  }
}

ExperimentResult run_all(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = cfg;

  struct Job {
    std::size_t block;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.n_meas.size(); ++i) {
    for (int t = 0; t < cfg.n_trials; ++t) jobs.push_back({i, t});
  }
  std::vector<TrialOutput> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      outputs[j] = run_trial(cfg, cfg.n_meas[jobs[j].block], jobs[j].trial);
    }
  };
  unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Jobs are ordered by (block, trial), so assembly does not depend on scheduling.
  for (Index m : cfg.n_meas) {
    MeasurementBlock b;
    b.n_meas = m;
    result.blocks.push_back(std::move(b));
  }
  std::vector<std::vector<double>> se_finals(result.blocks.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    MeasurementBlock& b = result.blocks[jobs[j].block];
    for (ResultRow& r : outputs[j].rows) b.rows.push_back(std::move(r));
    for (TrialFailure& f : outputs[j].failures) result.failures.push_back(std::move(f));
    result.total_clamp_events += outputs[j].clamp_events;
    if (!std::isnan(outputs[j].se_final)) se_finals[jobs[j].block].push_back(outputs[j].se_final);
  }
  if (cfg.n_trials == 0) {
    // SE needs no sampling: predict on the network trial 0 would use.
    for (MeasurementBlock& b : result.blocks) {
      try {
        SEOptions so;
        so.n_iter = cfg.n_iter;
        so.quadrature = cfg.se_quadrature;
        const SEState se = run_se(extract_statistics(build_trial_network(cfg, 0, b.n_meas)), so);
        b.rows = se_rows(se);
      } catch (const Error& e) {
        result.failures.push_back({b.n_meas, -1, "se", e.what()});
      }
    }
  }
  for (std::size_t i = 0; i < result.blocks.size(); ++i) {
    summarize(cfg, result.blocks[i], std::move(se_finals[i]));
  }
  result.runtime_ms = elapsed_ms(start);
  return result;
}

NetworkKind kind_from_string(const std::string& s) {
  if (s == "synthetic") return NetworkKind::synthetic;
  if (s == "gaussian-chain") return NetworkKind::gaussian_chain;
  throw ConfigError("network kind must be 'synthetic' or 'gaussian-chain'");
}

const char* kind_to_string(NetworkKind k) {
  return k == NetworkKind::synthetic ? "synthetic" : "gaussian-chain";
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
void maybe(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_meas.empty()) throw ConfigError("experiment: n_meas must list at least one value");
  for (Index m : n_meas) {
    if (m <= 0) throw ConfigError("experiment: n_meas values must be positive");
  }
  if (n_iter < 1) throw ConfigError("experiment: n_iter must be >= 1");
  if (n_trials < 0) throw ConfigError("experiment: n_trials must be >= 0");
  if (methods.empty()) throw ConfigError("experiment: methods must be nonempty");
  for (const auto& m : methods) {
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end()) {
      throw ConfigError("experiment: unknown method '" + m + "'");
    }
  }
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("experiment: damping must be in (0, 1]");
  if (threads < 0) throw ConfigError("experiment: threads must be >= 0");
}

ExperimentConfig preset_iteration_config() { return ExperimentConfig{}; }

ExperimentConfig preset_sweep_config() {
  ExperimentConfig c;
  c.n_meas = {100, 200, 300, 400, 500, 600};
  return c;
}

ExperimentConfig preset_baseline_config() {
  ExperimentConfig c;
  c.methods = {"mlvamp", "map", "sgld"};
  // The 500-step / 0.002 settings suit a far flatter posterior than this network's: at 30 dB
  // the measurement term makes SGLD unstable above roughly 1e-4 and Adam needs more steps.
  c.map.steps = 5000;
  c.sgld.lambda = 3e-5;
  return c;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["network_kind"] = kind_to_string(c.kind);
  Json net = synthetic_config_to_json(c.network);
  net.erase("n_meas");
  net.erase("seed");
  j["network"] = std::move(net);
  Json chain = gaussian_chain_config_to_json(c.chain);
  chain.erase("n_meas");
  chain.erase("seed");
  j["chain"] = std::move(chain);
  j["n_meas"] = c.n_meas;
  j["n_iter"] = c.n_iter;
  j["n_trials"] = c.n_trials;
  j["seed"] = c.seed;
  j["methods"] = c.methods;
  j["map"] = {{"steps", c.map.steps},
              {"step_size", c.map.step_size},
              {"beta1", c.map.beta1},
              {"beta2", c.map.beta2},
              {"epsilon", c.map.epsilon},
              {"safeguard", c.map.safeguard}};
  j["sgld"] = {{"steps", c.sgld.steps}, {"lambda", c.sgld.lambda}, {"burn_in", c.sgld.burn_in}};
  j["damping"] = c.damping;
  j["scalar_method"] = c.scalar_method == DenoiserMethod::closed_form ? "closed-form" : "quadrature";
  j["se_quadrature"] = {{"outer_nodes", c.se_quadrature.outer_nodes},
                        {"grading_levels", c.se_quadrature.grading_levels},
                        {"inner_nodes", c.se_quadrature.inner_nodes},
                        {"window_sds", c.se_quadrature.window_sds}};
  j["timing"] = c.timing;
  j["threads"] = c.threads;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig c) {
  const std::string where = "experiment config";
  check_keys(j, {"network_kind", "network", "chain", "n_meas", "n_iter", "n_trials", "seed", "methods",
                 "map", "sgld", "damping", "scalar_method", "se_quadrature", "timing", "threads",
                 "out_dir"},
             where);
  if (j.contains("network_kind")) {
    std::string k;
    maybe(j, "network_kind", k, where);
    c.kind = kind_from_string(k);
  }
  if (j.contains("network")) {
    if (j.at("network").contains("n_meas") || j.at("network").contains("seed")) {
      throw ConfigError(where + ": set n_meas and seed at the top level");
    }
    c.network = synthetic_config_from_json(j.at("network"), c.network);
  }
  if (j.contains("chain")) {
    if (j.at("chain").contains("n_meas") || j.at("chain").contains("seed")) {
      throw ConfigError(where + ": set n_meas and seed at the top level");
    }
    c.chain = gaussian_chain_config_from_json(j.at("chain"), c.chain);
  }
  if (j.contains("n_meas")) {
    if (j.at("n_meas").is_number()) {
      c.n_meas = {j.at("n_meas").get<Index>()};
    } else {
      maybe(j, "n_meas", c.n_meas, where);
    }
  }
  maybe(j, "n_iter", c.n_iter, where);
  maybe(j, "n_trials", c.n_trials, where);
  maybe(j, "seed", c.seed, where);
  maybe(j, "methods", c.methods, where);
  if (j.contains("map")) {
    const Json& m = j.at("map");
    check_keys(m, {"steps", "step_size", "beta1", "beta2", "epsilon", "safeguard"}, where + ".map");
    maybe(m, "steps", c.map.steps, where);
    maybe(m, "step_size", c.map.step_size, where);
    maybe(m, "beta1", c.map.beta1, where);
    maybe(m, "beta2", c.map.beta2, where);
    maybe(m, "epsilon", c.map.epsilon, where);
    maybe(m, "safeguard", c.map.safeguard, where);
  }
  if (j.contains("sgld")) {
    const Json& s = j.at("sgld");
    check_keys(s, {"steps", "lambda", "burn_in"}, where + ".sgld");
    maybe(s, "steps", c.sgld.steps, where);
    maybe(s, "lambda", c.sgld.lambda, where);
    maybe(s, "burn_in", c.sgld.burn_in, where);
  }
  maybe(j, "damping", c.damping, where);
  if (j.contains("scalar_method")) {
    std::string m;
    maybe(j, "scalar_method", m, where);
    if (m == "closed-form") {
      c.scalar_method = DenoiserMethod::closed_form;
    } else if (m == "quadrature") {
      c.scalar_method = DenoiserMethod::quadrature;
    } else {
      throw ConfigError(where + ": scalar_method must be 'closed-form' or 'quadrature'");
    }
  }
  if (j.contains("se_quadrature")) {
    const Json& q = j.at("se_quadrature");
    check_keys(q, {"outer_nodes", "grading_levels", "inner_nodes", "window_sds"}, where + ".se_quadrature");
    maybe(q, "outer_nodes", c.se_quadrature.outer_nodes, where);
    maybe(q, "grading_levels", c.se_quadrature.grading_levels, where);
    maybe(q, "inner_nodes", c.se_quadrature.inner_nodes, where);
    maybe(q, "window_sds", c.se_quadrature.window_sds, where);
  }
  maybe(j, "timing", c.timing, where);
  maybe(j, "threads", c.threads, where);
  maybe(j, "out_dir", c.out_dir, where);
  c.validate();
  return c;
}

std::uint64_t network_seed(const ExperimentConfig& c, int trial) {
  return derive_seed(c.seed, "network", static_cast<std::uint64_t>(trial));
}

std::uint64_t trajectory_seed(const ExperimentConfig& c, int trial) {
  return derive_seed(c.seed, "trajectory", static_cast<std::uint64_t>(trial));
}

NetworkSpec build_trial_network(const ExperimentConfig& c, int trial, Index m) {
  if (c.kind == NetworkKind::synthetic) {
    SyntheticConfig s = c.network;
    s.seed = network_seed(c, trial);
    s.n_meas = m;
    return build_synthetic_network(s);
  }
  GaussianChainConfig g = c.chain;
  g.seed = network_seed(c, trial);
  g.n_meas = m;
  return build_gaussian_chain(g);
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level must be in [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = kCsvHeader;
  out += "\r\n";
  for (const ResultRow& r : rows) {
    put_int(out, r.trial, r.trial < 0);
    out += ',';
    put_string(out, r.method);
    out += ',';
    put_int(out, r.half_iter, r.half_iter < 0);
    out += ',';
    put_int(out, r.layer, false);
    out += ',';
    put_double(out, r.nmse_db);
    out += ',';
    put_double(out, r.se_nmse_db);
    out += ',';
    put_double(out, r.gamma_plus);
    out += ',';
    put_double(out, r.gamma_minus);
    out += ',';
    put_int(out, r.clamp_events, r.clamp_events < 0);
    out += ',';
    put_double(out, r.runtime_ms);
    out += "\r\n";
  }
  return out;
}

std::vector<ResultRow> se_rows(const SEState& se, int trial) {
  std::vector<ResultRow> rows;
  const int halves = 2 * static_cast<int>(se.iterations.size());
  for (int h = 0; h < halves; ++h) {
    const SEIteration& it = se.iterations[h / 2];
    const bool fwd = h % 2 == 0;
    for (int l = 0; l < se.num_layers(); ++l) {
      ResultRow r;
      r.trial = trial;
      r.method = "se";
      r.half_iter = h;
      r.layer = l;
      r.nmse_db = kMissing;
      r.se_nmse_db = predicted_nmse_db(se, l, h);
      r.gamma_plus = it.gamma_plus[l];
      r.gamma_minus = fwd ? it.gamma_minus_in[l] : it.gamma_minus[l];
      r.clamp_events = 0;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

ExperimentResult run_iteration_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_meas.size() != 1) throw ConfigError("iteration experiment takes a single n_meas");
  if (cfg.n_trials < 1) throw ConfigError("iteration experiment needs n_trials >= 1");
  return run_all(cfg);
}

ExperimentResult run_measurement_sweep(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.methods = {"mlvamp"};
  return run_all(c);
}

ExperimentResult run_baseline_comparison(const ExperimentConfig& cfg) {
  if (cfg.n_meas.size() != 1) throw ConfigError("baseline comparison takes a single n_meas");
  if (cfg.n_trials < 1) throw ConfigError("baseline comparison needs n_trials >= 1");
  return run_all(cfg);
}

namespace {

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

Json result_summary_json(const ExperimentResult& r) {
  Json j;
  j["config"] = experiment_config_to_json(r.config);
  Json seeds = Json::array();
  for (int t = 0; t < r.config.n_trials; ++t) {
    seeds.push_back({{"trial", t},
                     {"network_seed", network_seed(r.config, t)},
                     {"trajectory_seed", trajectory_seed(r.config, t)}});
  }
  j["trial_seeds"] = std::move(seeds);
  Json blocks = Json::array();
  for (const MeasurementBlock& b : r.blocks) {
    Json bj;
    bj["n_meas"] = b.n_meas;
    bj["se_final_nmse_db"] = number_or_null(b.se_final);
    Json methods = Json::array();
    for (const MethodSummary& m : b.methods) {
      methods.push_back({{"method", m.method},
                         {"trials", m.count},
                         {"final_nmse_db_median", number_or_null(m.final_median)},
                         {"final_nmse_db_q1", number_or_null(m.final_q1)},
                         {"final_nmse_db_q3", number_or_null(m.final_q3)}});
    }
    bj["methods"] = std::move(methods);
    Json curve = Json::array();
    for (const CurvePoint& p : b.curve) {
      curve.push_back({{"half_iter", p.half_iter},
                       {"trials", p.count},
                       {"sim_median_db", number_or_null(p.sim_median)},
                       {"sim_q1_db", number_or_null(p.sim_q1)},
                       {"sim_q3_db", number_or_null(p.sim_q3)},
                       {"se_median_db", number_or_null(p.se_median)},
                       {"gap_db", number_or_null(p.gap_db)},
                       {"per_trial_gap_median_db", number_or_null(p.per_trial_gap_median)}});
    }
    bj["layer0_curve"] = std::move(curve);
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  Json failures = Json::array();
  for (const TrialFailure& f : r.failures) {
    failures.push_back(
        {{"n_meas", f.n_meas}, {"trial", f.trial}, {"method", f.method}, {"message", f.message}});
  }
  j["failures"] = std::move(failures);
  j["total_clamp_events"] = r.total_clamp_events;
  if (r.config.timing) j["runtime_ms"] = r.runtime_ms;
  return j;
}

std::vector<std::string> write_experiment_outputs(const ExperimentResult& r, const std::string& stem) {
  const std::filesystem::path dir = r.config.out_dir.empty() ? "." : r.config.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& text) {
    const std::string path = (dir / name).string();
    write_text_file(path, text);
    written.push_back(path);
  };
  if (r.blocks.size() == 1) {
    write(stem + ".csv", rows_to_csv(r.blocks.front().rows));
  } else {
    std::string summary = "n_meas,sim_median_db,sim_q1_db,sim_q3_db,se_nmse_db,gap_db,trials\r\n";
    for (const MeasurementBlock& b : r.blocks) {
      write(stem + "_M" + std::to_string(b.n_meas) + ".csv", rows_to_csv(b.rows));
      const CurvePoint& p = b.curve.back();
      summary += std::to_string(b.n_meas) + ',';
      put_double(summary, p.sim_median);
      summary += ',';
      put_double(summary, p.sim_q1);
      summary += ',';
      put_double(summary, p.sim_q3);
      summary += ',';
      put_double(summary, b.se_final);
      summary += ',';
      put_double(summary, p.gap_db);
      summary += ',' + std::to_string(p.count) + "\r\n";
    }
    write(stem + "_final.csv", summary);
  }
  write(stem + "_summary.json", dump_json(result_summary_json(r)));
  return written;
}

}  // namespace mlvamp
