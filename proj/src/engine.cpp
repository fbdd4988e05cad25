#include "mlvamp/engine.hpp"

#include "mlvamp/error.hpp"
#include "mlvamp/linear_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlvamp {

PrecisionStep precision_update(double alpha, double gamma_opp, const ClampLimits& lim) {
  if (!std::isfinite(alpha)) throw NumericalError("precision_update: alpha is not finite");
  if (!(gamma_opp > 0.0) || !std::isfinite(gamma_opp)) {
    throw NumericalError("precision_update: opposite precision must be positive and finite");
  }
  PrecisionStep st;
  const double a = std::clamp(alpha, lim.alpha_min, 1.0 - lim.alpha_min);
  if (a != alpha) ++st.clamps;
  double g = gamma_opp / a - gamma_opp;
  const double gc = std::clamp(g, lim.gamma_min, lim.gamma_max);
  if (gc != g) ++st.clamps;
  st.gamma_new = gc;
  st.eta = gc + gamma_opp;
  st.alpha = gamma_opp / st.eta;
  return st;
}

PrecisionStep precision_from_variance(double avg_var, double gamma_opp, const ClampLimits& lim) {
  if (!(avg_var >= 0.0) || !std::isfinite(avg_var)) {
    throw NumericalError("posterior variance is negative or not finite");
  }
  if (gamma_opp > 0.0) return precision_update(gamma_opp * avg_var, gamma_opp, lim);
  PrecisionStep st;
  const double eta = avg_var > 0.0 ? 1.0 / avg_var : kInf;
  st.gamma_new = std::clamp(eta, lim.gamma_min, lim.gamma_max);
  if (st.gamma_new != eta) ++st.clamps;
  st.eta = st.gamma_new;
  st.alpha = 0.0;
  return st;
}

Vector extrinsic_mean(double eta, const Vector& z_hat, double gamma_opp, const Vector& r_opp,
                      double gamma_new, const kernels::KernelTable& k) {
  if (z_hat.size() != r_opp.size()) throw DimensionError("extrinsic_mean: size mismatch");
  if (!(gamma_new > 0.0)) throw NumericalError("extrinsic_mean: gamma_new must be positive");
  Vector out(z_hat.size());
  k.extrinsic(z_hat.size(), eta, z_hat.data(), gamma_opp, r_opp.data(), gamma_new, out.data());
  return out;
}

double nmse_db(const Vector& truth, const Vector& estimate) {
  if (truth.size() != estimate.size()) throw DimensionError("nmse_db: size mismatch");
  const double den = truth.squaredNorm();
  if (!(den > 0.0)) throw NumericalError("nmse_db: truth has zero norm");
  const double ratio = (truth - estimate).squaredNorm() / den;
  if (ratio <= 1e-20) return -200.0;
  return 10.0 * std::log10(ratio);
}

MessageState MessageState::initial(const NetworkSpec& net) {
  const int L = net.num_stages();
  MessageState s;
  s.r_plus.resize(L);
  s.r_minus.resize(L);
  s.gamma_plus.assign(L, 0.0);
  s.gamma_minus.assign(L, 0.0);
  for (int l = 0; l < L; ++l) s.r_minus[l] = Vector::Zero(net.dims[l]);
  return s;
}

namespace {

struct LayerEstimate {
  Vector z_hat;
  double avg_var = 0.0;
};

const kernels::KernelTable& table(const EngineOptions& opt) {
  return opt.kernels ? *opt.kernels : kernels::active();
}

std::string dump_state(const MessageState& s) {
  std::ostringstream os;
  os.precision(10);
  os << "gamma_plus=[";
  for (double g : s.gamma_plus) os << g << ' ';
  os << "] gamma_minus=[";
  for (double g : s.gamma_minus) os << g << ' ';
  os << ']';
  return os.str();
}

[[noreturn]] void rethrow_with_context(const Error& e, const char* pass, int k, int l,
                                       const MessageState& s) {
  std::ostringstream os;
  os << "ML-VAMP " << pass << " pass failed at iteration " << k << ", layer " << l << ": "
     << e.what();
  throw NumericalError(os.str(), dump_state(s));
}

// Nonlinear stage l applied componentwise; `out_side` selects the z_l estimate (forward)
// rather than the z_{l-1} estimate (reverse).
LayerEstimate nonlinear_estimate(const NonlinearStage& st, const Vector& r_plus,
                                 const Vector& r_minus, double gp, double gm, bool out_side,
                                 DenoiserMethod method) {
  const ScalarChannel ch = ScalarChannel::from_stage(st);
  LayerEstimate e;
  e.z_hat.resize(r_plus.size());
  double acc = 0.0;
  for (Index n = 0; n < r_plus.size(); ++n) {
    const DenoiseResult d = denoise_middle(ch, r_plus(n), r_minus(n), gp, gm, method);
    e.z_hat(n) = out_side ? d.mean_out : d.mean_in;
    acc += out_side ? d.var_out : d.var_in;
  }
  e.avg_var = acc / static_cast<double>(r_plus.size());
  return e;
}

void store(Vector& target, double& gamma_target, Vector r_new, double gamma_new, double damping) {
  if (damping < 1.0 && target.size() == r_new.size() && gamma_target > 0.0) {
    target = damping * r_new + (1.0 - damping) * target;
    gamma_target = damping * gamma_new + (1.0 - damping) * gamma_target;
  } else {
    target = std::move(r_new);
    gamma_target = gamma_new;
  }
}

void size_record(IterationRecord& rec, int L, bool forward, bool with_truth) {
  if (forward) {
    rec.z_hat_plus.assign(L, Vector());
    rec.eta_plus.assign(L, 0.0);
    rec.gamma_plus.assign(L, 0.0);
    rec.gamma_minus_in.assign(L, 0.0);
    rec.alpha_plus.assign(L, 0.0);
    rec.nmse_plus_db.assign(with_truth ? L : 0, 0.0);
  } else {
    rec.z_hat_minus.assign(L, Vector());
    rec.eta_minus.assign(L, 0.0);
    rec.gamma_minus.assign(L, 0.0);
    rec.alpha_minus.assign(L, 0.0);
    rec.nmse_minus_db.assign(with_truth ? L : 0, 0.0);
  }
}

}  // namespace

void forward_pass(const NetworkSpec& net, const Vector& y, MessageState& state,
                  IterationRecord& rec, const EngineOptions& opt) {
  (void)y;
  const int L = net.num_stages();
  const auto& kt = table(opt);
  rec.k = state.k;
  size_record(rec, L, true, opt.truth != nullptr);
  rec.clamp_events_forward = 0;
  for (int l = 0; l < L; ++l) {
    try {
      LayerEstimate e;
      const double gm = state.gamma_minus[l];
      if (l == 0) {
        const GaussianEstimate g = denoise_input(0.0, gm);
        e.z_hat = gm * state.r_minus[0] * g.var;
        e.avg_var = g.var;
      } else if (net.is_linear(l)) {
        LinearEstimate le = denoise_linear(net.linear(l), state.r_plus[l - 1], state.r_minus[l],
                                           state.gamma_plus[l - 1], gm, kt);
        e.z_hat = std::move(le.z_hat_plus);
        e.avg_var = le.avg_var_out;
      } else {
        e = nonlinear_estimate(net.nonlinear(l), state.r_plus[l - 1], state.r_minus[l],
                               state.gamma_plus[l - 1], gm, true, opt.scalar_method);
      }
      const PrecisionStep st = precision_from_variance(e.avg_var, gm, opt.limits);
      Vector r = extrinsic_mean(st.eta, e.z_hat, gm, state.r_minus[l], st.gamma_new, kt);
      store(state.r_plus[l], state.gamma_plus[l], std::move(r), st.gamma_new, opt.damping);
      rec.eta_plus[l] = st.eta;
      rec.gamma_plus[l] = st.gamma_new;
      rec.gamma_minus_in[l] = gm;
      rec.alpha_plus[l] = st.alpha;
      rec.clamp_events_forward += st.clamps;
      if (opt.truth) rec.nmse_plus_db[l] = nmse_db((*opt.truth)[l], e.z_hat);
      if (opt.keep_estimates) rec.z_hat_plus[l] = std::move(e.z_hat);
    } catch (const Error& err) {
      rethrow_with_context(err, "forward", state.k, l, state);
    }
  }
}

void backward_pass(const NetworkSpec& net, const Vector& y, MessageState& state,
                   IterationRecord& rec, const EngineOptions& opt) {
  const int L = net.num_stages();
  const auto& kt = table(opt);
  size_record(rec, L, false, opt.truth != nullptr);
  rec.clamp_events_reverse = 0;
  for (int l = L - 1; l >= 0; --l) {
    try {
      LayerEstimate e;
      const int stage = l + 1;
      const double gp = state.gamma_plus[l];
      if (stage == L) {
        if (net.is_linear(stage)) {
          ObservedEstimate oe = denoise_linear_observed(net.linear(stage), y, state.r_plus[l], gp, kt);
          e.z_hat = std::move(oe.z_hat_minus);
          e.avg_var = oe.avg_var_in;
        } else {
          const ScalarChannel ch = ScalarChannel::from_stage(net.nonlinear(stage));
          e.z_hat.resize(y.size());
          double acc = 0.0;
          for (Index n = 0; n < y.size(); ++n) {
            const GaussianEstimate g =
                denoise_output_nonlinear(ch, y(n), state.r_plus[l](n), gp, opt.scalar_method);
            e.z_hat(n) = g.mean;
            acc += g.var;
          }
          e.avg_var = acc / static_cast<double>(y.size());
        }
      } else if (net.is_linear(stage)) {
        LinearEstimate le = denoise_linear(net.linear(stage), state.r_plus[l],
                                           state.r_minus[stage], gp, state.gamma_minus[stage], kt);
        e.z_hat = std::move(le.z_hat_minus);
        e.avg_var = le.avg_var_in;
      } else {
        e = nonlinear_estimate(net.nonlinear(stage), state.r_plus[l], state.r_minus[stage], gp,
                               state.gamma_minus[stage], false, opt.scalar_method);
      }
      const PrecisionStep st = precision_from_variance(e.avg_var, gp, opt.limits);
      Vector r = extrinsic_mean(st.eta, e.z_hat, gp, state.r_plus[l], st.gamma_new, kt);
      store(state.r_minus[l], state.gamma_minus[l], std::move(r), st.gamma_new, opt.damping);
      rec.eta_minus[l] = st.eta;
      rec.gamma_minus[l] = st.gamma_new;
      rec.alpha_minus[l] = st.alpha;
      rec.clamp_events_reverse += st.clamps;
      if (opt.truth) rec.nmse_minus_db[l] = nmse_db((*opt.truth)[l], e.z_hat);
      if (opt.keep_estimates) rec.z_hat_minus[l] = std::move(e.z_hat);
    } catch (const Error& err) {
      rethrow_with_context(err, "reverse", state.k, l, state);
    }
  }
  ++state.k;
}

EngineResult run(const NetworkSpec& net, const Vector& y, const EngineOptions& opt) {
  net.validate();
  if (y.size() != net.output_dim()) throw DimensionError("run: y does not match the network output");
  if (opt.max_iter < 0) throw ConfigError("run: max_iter must be >= 0");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw ConfigError("run: damping must be in (0, 1]");
  if (opt.truth && static_cast<int>(opt.truth->size()) != net.num_stages() + 1) {
    throw DimensionError("run: truth must hold z_0..z_L");
  }
  EngineResult res;
  res.state = MessageState::initial(net);
  res.records.reserve(opt.max_iter);
  for (int k = 0; k < opt.max_iter; ++k) {
    IterationRecord rec;
    forward_pass(net, y, res.state, rec, opt);
    backward_pass(net, y, res.state, rec, opt);
    res.clamp_events += rec.clamp_events_forward + rec.clamp_events_reverse;
    res.records.push_back(std::move(rec));
  }
  return res;
}

}  // namespace mlvamp
