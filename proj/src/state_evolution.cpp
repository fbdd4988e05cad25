#include "mlvamp/state_evolution.hpp"

#include "mlvamp/error.hpp"
#include "mlvamp/kernels.hpp"
#include "mlvamp/quadrature.hpp"
#include "mlvamp/special.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlvamp {

NetworkStatistics extract_statistics(const NetworkSpec& net) {
  net.validate();
  NetworkStatistics stats;
  for (int l = 1; l <= net.num_stages(); ++l) {
    LayerStatistics st;
    if (net.is_linear(l)) {
      const LinearStage& lin = net.linear(l);
      st.linear = true;
      st.s = lin.s;
      st.n_in = lin.n_in();
      st.n_out = lin.n_out();
      st.nu = lin.nu;
      st.bias_sq = lin.b.squaredNorm() / static_cast<double>(lin.n_out());
      st.bias_mean = lin.b.mean();
    } else {
      st.linear = false;
      st.channel = ScalarChannel::from_stage(net.nonlinear(l));
    }
    stats.stages.push_back(std::move(st));
  }
  return stats;
}

namespace {

double channel_output_mean(const ScalarChannel& ch, double mean, double var) {
  if (var == 0.0) return apply_activation(ch.activation, mean);
  const double sd = std::sqrt(var);
  double total = 0.0;
  for (const auto& p : affine_pieces(ch.activation)) {
    const auto tm = special::truncated_normal(mean, sd, p.lo, p.hi);
    const double mass = std::exp(tm.log_mass);
    if (mass > 0.0) total += mass * (p.slope * tm.mean + p.intercept);
  }
  return total;
}

// Spread of a layer around its mean; tiny negative values from rounding become 0.
double centred_variance(double tau, double mean) {
  const double c = tau - mean * mean;
  if (c >= 0.0) return c;
  if (c > -1e-12 * std::max(1.0, tau)) return 0.0;
  std::ostringstream os;
  os << "tau=" << tau << " mean=" << mean;
  throw NumericalError("state evolution: layer second moment is below its squared mean", os.str());
}

}  // namespace

LayerMoments compute_tau0(const NetworkStatistics& stats) {
  LayerMoments m;
  m.tau.push_back(stats.input_second_moment);
  m.mean.push_back(0.0);
  for (const auto& st : stats.stages) {
    const double tau_prev = m.tau.back();
    const double mean_prev = m.mean.back();
    if (st.linear) {
      if (st.s.size() > 0 && !std::isfinite(st.s.maxCoeff())) {
        throw NumericalError("state evolution: unbounded singular values");
      }
      const double gain = st.s.squaredNorm() / static_cast<double>(st.n_out);
      const double noise = st.nu == kInf ? 0.0 : 1.0 / st.nu;
      m.tau.push_back(gain * tau_prev + st.bias_sq + noise);
      m.mean.push_back(st.bias_mean);
    } else {
      const double c = centred_variance(tau_prev, mean_prev);
      m.tau.push_back(channel_output_second_moment(st.channel, mean_prev, c));
      m.mean.push_back(channel_output_mean(st.channel, mean_prev, c));
    }
  }
  return m;
}

double error_input(double gamma_minus) { return denoise_input(0.0, gamma_minus).var; }

ErrorPair error_nonlinear(const ScalarChannel& ch, double gamma_plus, double gamma_minus,
                          double tau_prev, double mean_prev, const SEQuadrature& q) {
  if (!(gamma_plus > 0.0) || !std::isfinite(gamma_plus)) {
    throw NumericalError("error_nonlinear: gamma_plus must be positive and finite");
  }
  if (!(gamma_minus >= 0.0)) throw NumericalError("error_nonlinear: gamma_minus must be >= 0");
  const bool observed = gamma_minus == kInf;
  const double c = centred_variance(tau_prev, mean_prev);
  ErrorPair out;

  // R+ ~ N(mean, v) and Z_in = R+ + N(0, 1/gamma_plus), so R+ | Z_in = z is Gaussian.
  double v = c - 1.0 / gamma_plus;
  if (v < 0.0) {
    if (v < -1e-12 * std::max(1.0, c)) out.clamped = true;
    v = 0.0;
  }
  const double rp_sd = c > 0.0 ? std::sqrt(v / (c * gamma_plus)) : 0.0;
  // R- | Z_in = z ~ N(phi(z), noise_var + 1/gamma_minus); the observed output drops 1/gamma_minus.
  double rm_var = ch.noise_var;
  if (!observed && gamma_minus > 0.0) rm_var += 1.0 / gamma_minus;
  const double rm_sd = std::sqrt(rm_var);
  const bool use_rm = observed || gamma_minus > 0.0;

  const auto& gh = quad::gauss_hermite(q.inner_nodes);
  static const std::vector<double> kOne{1.0};
  static const std::vector<double> kZero{0.0};
  const auto& rp_nodes = rp_sd > 0.0 ? gh.nodes : kZero;
  const auto& rp_w = rp_sd > 0.0 ? gh.weights : kOne;
  const auto& rm_nodes = use_rm && rm_sd > 0.0 ? gh.nodes : kZero;
  const auto& rm_w = use_rm && rm_sd > 0.0 ? gh.weights : kOne;

  // E over (R+, R-) of the posterior variances given Z_in = z.
  auto inner = [&](double z, double& var_in, double& var_out) {
    const double rp_mean = c > 0.0 ? mean_prev + (z - mean_prev) * v / c : mean_prev;
    const double fz = apply_activation(ch.activation, z);
    var_in = 0.0;
    var_out = 0.0;
    for (std::size_t i = 0; i < rp_nodes.size(); ++i) {
      const double rp = rp_mean + rp_sd * rp_nodes[i];
      for (std::size_t j = 0; j < rm_nodes.size(); ++j) {
        const double rm = fz + rm_sd * rm_nodes[j];
        const double w = rp_w[i] * rm_w[j];
        if (observed) {
          var_in += w * denoise_output_nonlinear(ch, rm, rp, gamma_plus).var;
        } else {
          const DenoiseResult d = denoise_middle(ch, rp, rm, gamma_plus, gamma_minus);
          var_in += w * d.var_in;
          var_out += w * d.var_out;
        }
      }
    }
  };

  double total_w = 0.0, acc_in = 0.0, acc_out = 0.0;
  auto add = [&](double z, double w) {
    double vi, vo;
    inner(z, vi, vo);
    total_w += w;
    acc_in += w * vi;
    acc_out += w * vo;
  };

  if (c == 0.0) {
    add(mean_prev, 1.0);
  } else {
    const double sd = std::sqrt(c);
    const auto& pieces = affine_pieces(ch.activation);
    if (pieces.size() == 1) {
      const auto& outer = quad::gauss_hermite(q.outer_nodes * (q.grading_levels + 1));
      for (std::size_t i = 0; i < outer.nodes.size(); ++i) {
        add(mean_prev + sd * outer.nodes[i], outer.weights[i]);
      }
    } else {
      const auto& gl = quad::gauss_legendre(q.outer_nodes);
      auto panel = [&](double a, double b) {
        const double h = b - a;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
          const double z = a + 0.5 * h * (gl.nodes[i] + 1.0);
          const double u = (z - mean_prev) / sd;
          add(z, 0.5 * h * gl.weights[i] * special::norm_pdf(u) / sd);
        }
      };
      for (const auto& p : pieces) {
        const double a = std::max(p.lo, mean_prev - q.window_sds * sd);
        const double b = std::min(p.hi, mean_prev + q.window_sds * sd);
        if (!(a < b)) continue;
        // Panels shrink geometrically toward a kink, where the integrand varies on the
        // scale of the message noise rather than the prior spread.
        const bool kink_lo = a == p.lo;
        const bool kink_hi = b == p.hi;
        const int levels = q.grading_levels;
        if (kink_lo && !kink_hi) {
          double right = b;
          for (int j = 0; j < levels; ++j) {
            const double left = a + (right - a) * 0.5;
            panel(left, right);
            right = left;
          }
          panel(a, right);
        } else if (kink_hi && !kink_lo) {
          double left = a;
          for (int j = 0; j < levels; ++j) {
            const double right = b - (b - left) * 0.5;
            panel(left, right);
            left = right;
          }
          panel(left, b);
        } else {
          const int n = std::max(1, levels / 2);
          for (int k = 0; k < n; ++k) panel(a + (b - a) * k / n, a + (b - a) * (k + 1) / n);
        }
      }
    }
  }
  out.e_minus = acc_in / total_w;
  out.e_plus = observed ? 0.0 : acc_out / total_w;
  return out;
}

ErrorPair error_linear(const LayerStatistics& st, double gamma_plus, double gamma_minus) {
  if (!st.linear) throw ConfigError("error_linear: stage is not linear");
  if (!(gamma_plus > 0.0) || !std::isfinite(gamma_plus)) {
    throw NumericalError("error_linear: gamma_plus must be positive and finite");
  }
  const auto& k = kernels::scalar_table();
  const Index rank = st.s.size();
  const std::vector<double> zeros(static_cast<std::size_t>(rank), 0.0);
  std::vector<double> m_in(rank), m_out(rank), v_in(rank), v_out(rank);
  ErrorPair out;
  if (gamma_minus == kInf) {
    if (st.nu == kInf) throw ConfigError("error_linear: observed stage needs finite noise precision");
    k.solve_observed(rank, st.s.data(), zeros.data(), zeros.data(), zeros.data(), gamma_plus, st.nu,
                     m_in.data(), v_in.data());
    double sum_in = k.sum(rank, v_in.data()) + static_cast<double>(st.n_in - rank) / gamma_plus;
    out.e_minus = sum_in / static_cast<double>(st.n_in);
    return out;
  }
  if (!(gamma_minus >= 0.0)) throw NumericalError("error_linear: gamma_minus must be >= 0");
  double pad_out;
  if (st.nu == kInf) {
    k.solve_constrained(rank, st.s.data(), zeros.data(), zeros.data(), zeros.data(), gamma_plus,
                        gamma_minus, m_in.data(), m_out.data(), v_in.data(), v_out.data());
    pad_out = 0.0;
  } else {
    k.solve_finite(rank, st.s.data(), zeros.data(), zeros.data(), zeros.data(), gamma_plus,
                   gamma_minus, st.nu, m_in.data(), m_out.data(), v_in.data(), v_out.data());
    pad_out = 1.0 / (gamma_minus + st.nu);
  }
  const double sum_in = k.sum(rank, v_in.data()) + static_cast<double>(st.n_in - rank) / gamma_plus;
  const double sum_out = k.sum(rank, v_out.data()) + static_cast<double>(st.n_out - rank) * pad_out;
  out.e_minus = sum_in / static_cast<double>(st.n_in);
  out.e_plus = sum_out / static_cast<double>(st.n_out);
  return out;
}

SEState run_se(const NetworkStatistics& stats, const SEOptions& opt) {
  if (opt.n_iter < 1) throw ConfigError("run_se: n_iter must be >= 1");
  const int L = stats.num_stages();
  if (L < 1) throw ConfigError("run_se: network has no stages");
  const LayerMoments mom = compute_tau0(stats);
  SEState se;
  se.tau0 = mom.tau;
  se.mean0 = mom.mean;

  std::vector<double> gp(L, 0.0), gm(L, 0.0);
  for (int k = 0; k < opt.n_iter; ++k) {
    SEIteration it;
    it.k = k;
    it.eta_plus.assign(L, 0.0);
    it.gamma_plus.assign(L, 0.0);
    it.gamma_minus_in.assign(L, 0.0);
    it.alpha_plus.assign(L, 0.0);
    it.eta_minus.assign(L, 0.0);
    it.gamma_minus.assign(L, 0.0);
    it.alpha_minus.assign(L, 0.0);

    for (int l = 0; l < L; ++l) {
      double e;
      if (l == 0) {
        e = error_input(gm[0]);
      } else {
        const LayerStatistics& st = stats.stages[l - 1];
        ErrorPair ep = st.linear ? error_linear(st, gp[l - 1], gm[l])
                                 : error_nonlinear(st.channel, gp[l - 1], gm[l], mom.tau[l - 1],
                                                   mom.mean[l - 1], opt.quadrature);
        if (ep.clamped) ++it.variance_clamps;
        e = ep.e_plus;
      }
      const PrecisionStep ps = precision_from_variance(e, gm[l], opt.limits);
      it.eta_plus[l] = ps.eta;
      it.gamma_plus[l] = ps.gamma_new;
      it.gamma_minus_in[l] = gm[l];
      it.alpha_plus[l] = ps.alpha;
      it.clamp_events += ps.clamps;
      gp[l] = ps.gamma_new;
    }
    for (int l = L - 1; l >= 0; --l) {
      const LayerStatistics& st = stats.stages[l];
      const double g_next = l + 1 == L ? kInf : gm[l + 1];
      ErrorPair ep = st.linear ? error_linear(st, gp[l], g_next)
                               : error_nonlinear(st.channel, gp[l], g_next, mom.tau[l],
                                                 mom.mean[l], opt.quadrature);
      if (ep.clamped) ++it.variance_clamps;
      const PrecisionStep ps = precision_from_variance(ep.e_minus, gp[l], opt.limits);
      it.eta_minus[l] = ps.eta;
      it.gamma_minus[l] = ps.gamma_new;
      it.alpha_minus[l] = ps.alpha;
      it.clamp_events += ps.clamps;
      gm[l] = ps.gamma_new;
    }
    se.clamp_events += it.clamp_events;
    se.variance_clamps += it.variance_clamps;
    se.iterations.push_back(std::move(it));
  }
  return se;
}

double predicted_nmse_db(const SEState& se, int layer, int half_iter) {
  if (layer < 0 || layer >= se.num_layers()) throw ConfigError("predicted_nmse_db: bad layer");
  if (half_iter < 0 || half_iter >= 2 * static_cast<int>(se.iterations.size())) {
    throw ConfigError("predicted_nmse_db: bad half-iteration");
  }
  const SEIteration& it = se.iterations[half_iter / 2];
  const double eta = half_iter % 2 == 0 ? it.eta_plus[layer] : it.eta_minus[layer];
  return 10.0 * std::log10((1.0 / eta) / se.tau0[layer]);
}

std::string se_to_json(const SEState& se) {
  nlohmann::json j;
  j["tau0"] = se.tau0;
  j["mean0"] = se.mean0;
  j["clamp_events"] = se.clamp_events;
  j["variance_clamps"] = se.variance_clamps;
  nlohmann::json its = nlohmann::json::array();
  for (const auto& it : se.iterations) {
    its.push_back({{"k", it.k},
                   {"eta_plus", it.eta_plus},
                   {"gamma_plus", it.gamma_plus},
                   {"alpha_plus", it.alpha_plus},
                   {"eta_minus", it.eta_minus},
                   {"gamma_minus", it.gamma_minus},
                   {"alpha_minus", it.alpha_minus}});
  }
  j["iterations"] = std::move(its);
  std::vector<std::vector<double>> pred;
  for (int l = 0; l < se.num_layers(); ++l) {
    std::vector<double> row;
    for (int h = 0; h < 2 * static_cast<int>(se.iterations.size()); ++h) {
      row.push_back(predicted_nmse_db(se, l, h));
    }
    pred.push_back(std::move(row));
  }
  j["predicted_nmse_db"] = std::move(pred);
  return j.dump(2);
}

}  // namespace mlvamp
