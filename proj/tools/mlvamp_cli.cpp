// Command-line front end: network generation, sampling, inference, SE and experiments.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 when some trials (or the single
// requested run) failed numerically. Partial results are still written in that case.

#include "mlvamp/engine.hpp"
#include "mlvamp/error.hpp"
#include "mlvamp/experiment.hpp"
#include "mlvamp/network_io.hpp"
#include "mlvamp/state_evolution.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

using namespace mlvamp;

namespace {

struct Common {
  std::string config;
  bool paper = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string out = ".";
  int threads = 0;
  bool timing = false;
};

void add_common(CLI::App* app, Common& c, bool with_trials) {
  auto* cfg = app->add_option("--config", c.config, "Experiment config (JSON)");
  auto* paper = app->add_flag("--paper", c.paper, "Use the built-in preset (the default values)");
  cfg->excludes(paper);
  app->add_option("--seed", c.seed, "Master seed");
  if (with_trials) {
    app->add_option("--trials", c.trials, "Number of trials");
    app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
    app->add_flag("--timing", c.timing, "Fill the runtime_ms column");
  }
  app->add_option("--out", c.out, "Output directory");
}

ExperimentConfig load_config(const Common& c, ExperimentConfig preset) {
  ExperimentConfig cfg =
      c.config.empty() ? std::move(preset) : experiment_config_from_json(read_json_file(c.config), preset);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.n_trials = *c.trials;
  if (c.threads > 0) cfg.threads = c.threads;
  if (c.timing) cfg.timing = true;
  cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

std::string out_path(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

int report(const ExperimentResult& r, const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  for (const MeasurementBlock& b : r.blocks) {
    std::cout << "M=" << b.n_meas;
    for (const MethodSummary& m : b.methods) {
      std::cout << "  " << m.method << " final NMSE median " << m.final_median << " dB ("
                << m.count << " trials)";
    }
    std::cout << "  SE " << b.se_final << " dB\n";
  }
  for (const TrialFailure& f : r.failures) {
    std::cerr << "trial " << f.trial << " (M=" << f.n_meas << ", " << f.method << ") failed: "
              << f.message << "\n";
  }
  return r.partial_failure() ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ML-VAMP inference, state evolution and synthetic experiments"};
  app.require_subcommand(1);

  Common gen_c;
  bool gen_explicit = false;
  auto* gen = app.add_subcommand("generate", "Build a network and write its JSON description");
  add_common(gen, gen_c, false);
  gen->add_flag("--explicit", gen_explicit, "Store orthogonal factors instead of the seed");

  std::string sample_net;
  std::uint64_t sample_seed = 1;
  std::string sample_out = ".";
  auto* sample = app.add_subcommand("sample", "Draw a trajectory z_0..z_L from a network");
  sample->add_option("--network", sample_net, "Network JSON")->required();
  sample->add_option("--seed", sample_seed, "Trajectory seed");
  sample->add_option("--out", sample_out, "Output directory");

  std::string infer_net, infer_obs, infer_out = ".";
  int infer_iters = 50;
  double infer_damping = 1.0;
  auto* infer = app.add_subcommand("infer", "Run ML-VAMP on an observation");
  infer->add_option("--network", infer_net, "Network JSON")->required();
  infer->add_option("--observation", infer_obs, "Trajectory or {\"y\": [...]} JSON")->required();
  infer->add_option("--iters", infer_iters, "Iterations");
  infer->add_option("--damping", infer_damping, "Damping weight in (0, 1]");
  infer->add_option("--out", infer_out, "Output directory");

  Common se_c;
  std::string se_net;
  auto* se = app.add_subcommand("se", "State-evolution prediction for a network");
  add_common(se, se_c, false);
  se->add_option("--network", se_net, "Network JSON (otherwise the config's trial-0 network)");

  Common it_c, sw_c, bl_c;
  auto* iters = app.add_subcommand("experiment-iters", "NMSE versus half-iteration, with SE overlay");
  add_common(iters, it_c, true);
  auto* sweep = app.add_subcommand("experiment-sweep", "Final NMSE versus measurement count");
  add_common(sweep, sw_c, true);
  auto* base = app.add_subcommand("baselines", "ML-VAMP against MAP and SGLD on shared trajectories");
  add_common(base, bl_c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const ExperimentConfig cfg = load_config(gen_c, preset_iteration_config());
      NetworkSpec net = build_trial_network(cfg, 0, cfg.n_meas.front());
      if (gen_c.seed) {
        // An explicit seed names the network directly rather than a trial of the experiment.
        if (cfg.kind == NetworkKind::synthetic) {
          SyntheticConfig s = cfg.network;
          s.seed = *gen_c.seed;
          s.n_meas = cfg.n_meas.front();
          net = build_synthetic_network(s);
        } else {
          GaussianChainConfig g = cfg.chain;
          g.seed = *gen_c.seed;
          g.n_meas = cfg.n_meas.front();
          net = build_gaussian_chain(g);
        }
      }
      const bool explicit_matrices = gen_explicit || !net.generator;
      const std::string path = out_path(gen_c.out, "network.json");
      write_text_file(path, dump_json(network_to_json(net, explicit_matrices)));
      for (const auto& f : net.flags) std::cerr << "note: " << f << "\n";
      std::cout << "wrote " << path << "\n";
      return 0;
    }
    if (*sample) {
      const NetworkSpec net = network_from_json(read_json_file(sample_net));
      Json doc = trajectory_to_json(sample_trajectory(net, sample_seed));
      doc["seed"] = sample_seed;
      const std::string path = out_path(sample_out, "trajectory.json");
      write_text_file(path, dump_json(doc));
      std::cout << "wrote " << path << "\n";
      return 0;
    }
    if (*infer) {
      const NetworkSpec net = network_from_json(read_json_file(infer_net));
      const Trajectory obs = trajectory_from_json(read_json_file(infer_obs));
      const bool have_truth = static_cast<int>(obs.z.size()) == net.num_stages() + 1;
      EngineOptions opt;
      opt.max_iter = infer_iters;
      opt.damping = infer_damping;
      if (have_truth) opt.truth = &obs.z;
      try {
        const EngineResult res = run(net, obs.output(), opt);
        const IterationRecord& last = res.records.back();
        Json doc;
        doc["iterations"] = infer_iters;
        doc["clamp_events"] = res.clamp_events;
        Json est = Json::array();
        for (const Vector& v : last.z_hat_minus) est.push_back(vector_to_json(v));
        doc["z_hat"] = std::move(est);  // reverse-pass estimates of z_0..z_{L-1}
        doc["eta"] = last.eta_minus;
        if (have_truth) {
          std::vector<ResultRow> rows;
          for (int h = 0; h < 2 * infer_iters; ++h) {
            const IterationRecord& rec = res.records[h / 2];
            const bool fwd = h % 2 == 0;
            for (int l = 0; l < net.num_stages(); ++l) {
              ResultRow r;
              r.trial = 0;
              r.method = "mlvamp";
              r.half_iter = h;
              r.layer = l;
              r.nmse_db = fwd ? rec.nmse_plus_db[l] : rec.nmse_minus_db[l];
              r.gamma_plus = rec.gamma_plus[l];
              r.gamma_minus = fwd ? rec.gamma_minus_in[l] : rec.gamma_minus[l];
              r.clamp_events = fwd ? rec.clamp_events_forward : rec.clamp_events_reverse;
              rows.push_back(std::move(r));
            }
          }
          doc["final_nmse_db"] = last.nmse_minus_db;
          write_text_file(out_path(infer_out, "infer.csv"), rows_to_csv(rows));
        }
        const std::string path = out_path(infer_out, "inference.json");
        write_text_file(path, dump_json(doc));
        std::cout << "wrote " << path << "\n";
        return 0;
      } catch (const NumericalError& e) {
        std::cerr << "inference failed: " << e.what() << "\n";
        return 2;
      }
    }
    if (*se) {
      const ExperimentConfig cfg = load_config(se_c, preset_iteration_config());
      const NetworkSpec net = se_net.empty() ? build_trial_network(cfg, 0, cfg.n_meas.front())
                                             : network_from_json(read_json_file(se_net));
      SEOptions so;
      so.n_iter = cfg.n_iter;
      so.quadrature = cfg.se_quadrature;
      const SEState state = run_se(extract_statistics(net), so);
      write_text_file(out_path(se_c.out, "se.json"), se_to_json(state) + "\n");
      write_text_file(out_path(se_c.out, "se.csv"), rows_to_csv(se_rows(state)));
      std::cout << "wrote " << out_path(se_c.out, "se.json") << "\n";
      std::cout << "final input-layer prediction " << predicted_nmse_db(state, 0, 2 * cfg.n_iter - 1)
                << " dB\n";
      return 0;
    }
    if (*iters) {
      const ExperimentResult r = run_iteration_experiment(load_config(it_c, preset_iteration_config()));
      return report(r, write_experiment_outputs(r, "iterations"));
    }
    if (*sweep) {
      const ExperimentResult r = run_measurement_sweep(load_config(sw_c, preset_sweep_config()));
      return report(r, write_experiment_outputs(r, "sweep"));
    }
    if (*base) {
      const ExperimentResult r = run_baseline_comparison(load_config(bl_c, preset_baseline_config()));
      return report(r, write_experiment_outputs(r, "baselines"));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
