#include "mlvamp/scalar_denoiser.hpp"

#include "mlvamp/error.hpp"
#include "mlvamp/quadrature.hpp"
#include "mlvamp/random.hpp"
#include "mlvamp/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace mlvamp {

namespace {

// z_out given z_in after integrating against the message on z_out:
//   log-likelihood of z_in is -gamma_eff/2 (phi(z_in) - r_minus)^2,
//   z_out | z_in ~ N(w phi(z_in) + (1 - w) r_minus, v_cond).
struct ChannelTerms {
  double gamma_eff;
  double w;
  double v_cond;
  bool observed;  // r_minus is the output itself
};

std::string describe(const ScalarChannel& ch, double r_plus, double r_minus, double gp, double gm) {
  std::ostringstream os;
  os.precision(17);
  os << "activation=" << to_string(ch.activation) << " noise_var=" << ch.noise_var
     << " r_plus=" << r_plus << " r_minus=" << r_minus << " gamma_plus=" << gp
     << " gamma_minus=" << gm;
  return os.str();
}

ChannelTerms channel_terms(const ScalarChannel& ch, double gm) {
  const double s2 = ch.noise_var;
  if (!(s2 >= 0.0) || !std::isfinite(s2)) throw ConfigError("channel noise variance must be >= 0");
  if (!(gm >= 0.0)) throw ConfigError("gamma_minus must be >= 0");
  if (gm == kInf) {
    if (s2 == 0.0) {
      throw ConfigError("an observed deterministic output has no density; use the output denoiser");
    }
    return {1.0 / s2, 0.0, 0.0, true};
  }
  if (gm == 0.0) return {0.0, 1.0, s2, false};
  const double w = 1.0 / (1.0 + gm * s2);
  return {gm * w, w, s2 * w, false};
}

void check_inputs(const ScalarChannel& ch, double r_plus, double r_minus, double gp, double gm) {
  if (!std::isfinite(r_plus) || !std::isfinite(r_minus)) {
    throw NumericalError("denoiser input mean is not finite", describe(ch, r_plus, r_minus, gp, gm));
  }
  if (!(gp > 0.0) || !std::isfinite(gp)) {
    throw NumericalError("gamma_plus must be positive and finite",
                         describe(ch, r_plus, r_minus, gp, gm));
  }
}

struct PieceMoments {
  double log_mass;
  double mean_in;
  double var_in;
  double mean_out;
  double var_out;
};

// Gaussian envelope of the integrand on one piece: precision and centre.
struct Envelope {
  double precision;
  double centre;
  double log_scale;  // value of the exponent's constant term
};

Envelope piece_envelope(const AffinePiece& p, const ChannelTerms& t, double r_plus, double r_minus,
                        double gp) {
  const double a = p.slope;
  const double ga2 = t.gamma_eff * a * a;
  const double prec = gp + ga2;
  const double resid = t.gamma_eff > 0.0 ? r_minus - p.intercept - a * r_plus : 0.0;
  const double centre = r_plus + (t.gamma_eff * a / prec) * resid;
  const double log_scale = -0.5 * (gp * t.gamma_eff / prec) * resid * resid;
  return {prec, centre, log_scale};
}

PieceMoments closed_form_piece(const AffinePiece& p, const ChannelTerms& t, double r_plus,
                               double r_minus, double gp) {
  const Envelope e = piece_envelope(p, t, r_plus, r_minus, gp);
  const auto tm = special::truncated_normal(e.centre, 1.0 / std::sqrt(e.precision), p.lo, p.hi);
  PieceMoments out;
  out.log_mass = e.log_scale - 0.5 * std::log(e.precision) + tm.log_mass;
  out.mean_in = tm.mean;
  out.var_in = tm.var;
  if (t.observed) {
    out.mean_out = r_minus;
    out.var_out = 0.0;
  } else {
    out.mean_out = t.w * (p.slope * tm.mean + p.intercept) + (1.0 - t.w) * r_minus;
    out.var_out = t.w * t.w * p.slope * p.slope * tm.var + t.v_cond;
  }
  return out;
}

// Generic log-integrand: prior message on z_in plus the channel log-likelihood.
struct Integrand {
  Activation act;
  ChannelTerms t;
  double r_plus, r_minus, gp;

  double log_value(double z) const {
    const double d = z - r_plus;
    double v = -0.5 * gp * d * d;
    if (t.gamma_eff > 0.0) {
      const double e = apply_activation(act, z) - r_minus;
      v -= 0.5 * t.gamma_eff * e * e;
    }
    return v;
  }
  // log_value(z) - log_value(c), as differences of squares so that a message far from the
  // window does not cancel catastrophically.
  double log_ratio(double z, double c) const {
    double v = -0.5 * gp * (z - c) * (z + c - 2.0 * r_plus);
    if (t.gamma_eff > 0.0) {
      const double fz = apply_activation(act, z);
      const double fc = apply_activation(act, c);
      v -= 0.5 * t.gamma_eff * (fz - fc) * (fz + fc - 2.0 * r_minus);
    }
    return v;
  }
  double out_mean(double z) const {
    if (t.observed) return r_minus;
    return t.w * apply_activation(act, z) + (1.0 - t.w) * r_minus;
  }
};

// Raw integrals relative to exp(ref) and the shifts c0 (for z) and d0 (for the output mean).
struct Sums {
  double m0 = 0, m1 = 0, m2 = 0, o1 = 0, o2 = 0;

  void add(double weight, double dz, double dout) {
    m0 += weight;
    m1 += weight * dz;
    m2 += weight * dz * dz;
    o1 += weight * dout;
    o2 += weight * dout * dout;
  }
};

PieceMoments finish(const Sums& s, double log_norm, double c0, double d0, const ChannelTerms& t) {
  PieceMoments out;
  out.log_mass = log_norm + std::log(s.m0);
  const double e1 = s.m1 / s.m0;
  out.mean_in = c0 + e1;
  out.var_in = std::max(0.0, s.m2 / s.m0 - e1 * e1);
  const double f1 = s.o1 / s.m0;
  out.mean_out = d0 + f1;
  out.var_out = t.observed ? 0.0 : std::max(0.0, s.o2 / s.m0 - f1 * f1) + t.v_cond;
  return out;
}

constexpr int kHermiteNodes = 63;
constexpr int kLegendreNodes = 16;
constexpr int kInitialPanels = 4;
constexpr int kMaxRefinements = 6;
constexpr double kWindowSds = 12.0;
constexpr double kDecayUnits = 40.0;
constexpr double kRelTol = 1e-10;
constexpr double kVarFloor = 1e-15;
constexpr std::size_t kMaxPieces = 4;

PieceMoments quadrature_piece(const AffinePiece& p, const Integrand& f, const ScalarChannel& ch) {
  const Envelope e = piece_envelope(p, f.t, f.r_plus, f.r_minus, f.gp);
  const double sd = 1.0 / std::sqrt(e.precision);
  const bool lo_inf = !std::isfinite(p.lo);
  const bool hi_inf = !std::isfinite(p.hi);

  if (lo_inf && hi_inf) {
    // Whole line: factor out the envelope and apply Gauss-Hermite.
    const auto& rule = quad::gauss_hermite(kHermiteNodes);
    const double c0 = e.centre;
    const double d0 = f.out_mean(c0);
    const double ref = f.log_value(c0);
    Sums s;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double z = e.centre + sd * rule.nodes[i];
      const double g = f.log_ratio(z, c0) + 0.5 * rule.nodes[i] * rule.nodes[i];
      s.add(rule.weights[i] * std::exp(g), z - c0, f.out_mean(z) - d0);
    }
    return finish(s, ref + 0.5 * std::log(2.0 * M_PI) + std::log(sd), c0, d0, f.t);
  }

  // Half line: composite Gauss-Legendre over a window that carries all but a negligible
  // fraction of the mass.
  // Around the centre when it lies in the piece, otherwise from the nearer end over the
  // distance in which the envelope decays by exp(-kDecayUnits).
  const double len = kWindowSds * sd;
  double a, b;
  if (e.centre > p.hi) {
    b = p.hi;
    a = p.hi - std::min(len, kDecayUnits / (e.precision * (e.centre - p.hi)));
  } else if (e.centre < p.lo) {
    a = p.lo;
    b = p.lo + std::min(len, kDecayUnits / (e.precision * (p.lo - e.centre)));
  } else {
    a = std::max(p.lo, e.centre - len);
    b = std::min(p.hi, e.centre + len);
  }
  a = std::max(a, p.lo);
  b = std::min(b, p.hi);
  const double c0 = std::clamp(e.centre, a, b);
  const double d0 = f.out_mean(c0);
  const double ref = f.log_value(c0);
  const auto& rule = quad::gauss_legendre(kLegendreNodes);

  auto integrate = [&](int panels) {
    Sums s;
    const double h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
      const double mid = a + (k + 0.5) * h;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = mid + 0.5 * h * rule.nodes[i];
        const double wt = 0.5 * h * rule.weights[i] * std::exp(f.log_ratio(z, c0));
        s.add(wt, z - c0, f.out_mean(z) - d0);
      }
    }
    return s;
  };

  int panels = kInitialPanels;
  Sums coarse = integrate(panels);
  for (int r = 0; r < kMaxRefinements; ++r) {
    panels *= 2;
    Sums fine = integrate(panels);
    const double scale = std::max(std::abs(fine.m0), std::numeric_limits<double>::min());
    const double err0 = std::abs(fine.m0 - coarse.m0) / scale;
    const double err1 = std::abs(fine.m1 - coarse.m1) / (scale * sd);
    const double err2 = std::abs(fine.m2 - coarse.m2) / (scale * sd * sd);
    if (fine.m0 > 0.0 && err0 < kRelTol && err1 < kRelTol && err2 < kRelTol) {
      return finish(fine, ref, c0, d0, f.t);
    }
    coarse = fine;
  }
  std::ostringstream os;
  os << describe(ch, f.r_plus, f.r_minus, f.gp, f.t.gamma_eff) << " window=[" << a << "," << b
     << "] panels=" << panels;
  throw NumericalError("denoiser quadrature did not converge", os.str());
}

// Mixes per-piece moments with weights proportional to exp(log_mass).
template <class Diag>
DenoiseResult combine(const PieceMoments* pieces, std::size_t count, Diag diag) {
  double top = -kInf;
  for (std::size_t i = 0; i < count; ++i) {
    if (std::isnan(pieces[i].log_mass)) throw NumericalError("denoiser piece mass is NaN", diag());
    top = std::max(top, pieces[i].log_mass);
  }
  if (!std::isfinite(top)) throw NumericalError("denoiser likelihood is zero everywhere", diag());
  double total = 0.0;
  double w[kMaxPieces];
  for (std::size_t i = 0; i < count; ++i) {
    w[i] = std::exp(pieces[i].log_mass - top);
    total += w[i];
  }
  DenoiseResult r;
  for (std::size_t i = 0; i < count; ++i) {
    w[i] /= total;
    r.mean_in += w[i] * pieces[i].mean_in;
    r.mean_out += w[i] * pieces[i].mean_out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (w[i] == 0.0) continue;
    const double di = pieces[i].mean_in - r.mean_in;
    const double dout = pieces[i].mean_out - r.mean_out;
    r.var_in += w[i] * (pieces[i].var_in + di * di);
    r.var_out += w[i] * (pieces[i].var_out + dout * dout);
  }
  r.var_in = std::max(r.var_in, kVarFloor);
  r.var_out = std::max(r.var_out, kVarFloor);
  return r;
}

}  // namespace

DenoiseResult denoise_middle(const ScalarChannel& ch, double r_plus, double r_minus,
                             double gamma_plus, double gamma_minus, DenoiserMethod method) {
  check_inputs(ch, r_plus, r_minus, gamma_plus, gamma_minus);
  const ChannelTerms t = channel_terms(ch, gamma_minus);
  const auto& pieces = affine_pieces(ch.activation);
  PieceMoments parts[kMaxPieces];
  const std::size_t count = std::min(pieces.size(), kMaxPieces);
  if (method == DenoiserMethod::closed_form) {
    for (std::size_t i = 0; i < count; ++i) {
      parts[i] = closed_form_piece(pieces[i], t, r_plus, r_minus, gamma_plus);
    }
  } else {
    const Integrand f{ch.activation, t, r_plus, r_minus, gamma_plus};
    for (std::size_t i = 0; i < count; ++i) parts[i] = quadrature_piece(pieces[i], f, ch);
  }
  return combine(parts, count,
                 [&] { return describe(ch, r_plus, r_minus, gamma_plus, gamma_minus); });
}

GaussianEstimate denoise_input(double r_minus, double gamma_minus) {
  if (!(gamma_minus >= 0.0)) throw ConfigError("gamma_minus must be >= 0");
  if (gamma_minus == kInf) return {r_minus, 0.0};
  const double var = 1.0 / (1.0 + gamma_minus);
  return {gamma_minus * r_minus * var, var};
}

GaussianEstimate denoise_output_nonlinear(const ScalarChannel& ch, double y, double r_plus,
                                          double gamma_plus, DenoiserMethod method) {
  if (ch.noise_var > 0.0) {
    const DenoiseResult r = denoise_middle(ch, r_plus, y, gamma_plus, kInf, method);
    return {r.mean_in, r.var_in};
  }
  check_inputs(ch, r_plus, y, gamma_plus, kInf);
  switch (ch.activation) {
    case Activation::identity:
      return {y, kVarFloor};
    case Activation::relu: {
      if (y > 0.0) return {y, kVarFloor};
      if (y == 0.0) {
        const auto tm =
            special::truncated_normal(r_plus, 1.0 / std::sqrt(gamma_plus), -kInf, 0.0);
        return {tm.mean, std::max(tm.var, kVarFloor)};
      }
      throw NumericalError("denoiser likelihood is zero everywhere: negative ReLU output",
                           describe(ch, r_plus, y, gamma_plus, kInf));
    }
    case Activation::sigmoid_probit_reserved:
      break;
  }
  throw ConfigError("activation " + to_string(ch.activation) + " has no denoiser");
}

MonteCarloMoments mc_oracle_moments(const ScalarChannel& ch, double r_plus, double r_minus,
                                    double gamma_plus, double gamma_minus, long n_samples,
                                    std::uint64_t seed) {
  if (n_samples < 10000) throw ConfigError("mc_oracle_moments needs at least 1e4 samples");
  check_inputs(ch, r_plus, r_minus, gamma_plus, gamma_minus);
  if (!(gamma_minus >= 0.0) || gamma_minus == kInf) {
    throw ConfigError("mc_oracle_moments needs a finite gamma_minus >= 0");
  }
  (void)affine_pieces(ch.activation);  // rejects activations without a denoiser

  // Defensive mixture proposal: the prior message and a Gaussian fused with the output message.
  const double sd_prior = 1.0 / std::sqrt(gamma_plus);
  const double g_fused = gamma_plus + gamma_minus / (1.0 + gamma_minus * ch.noise_var);
  const double m_fused =
      (gamma_plus * r_plus + (g_fused - gamma_plus) * r_minus) / g_fused;
  const double sd_fused = 1.0 / std::sqrt(g_fused);
  const double sd_noise = std::sqrt(ch.noise_var);

  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);

  std::vector<double> logw(n_samples), zin(n_samples), zout(n_samples);
  auto log_gauss = [](double x, double m, double sd) {
    const double u = (x - m) / sd;
    return -0.5 * u * u - std::log(sd);
  };
  for (long i = 0; i < n_samples; ++i) {
    const double z = coin(rng) ? r_plus + sd_prior * normal(rng) : m_fused + sd_fused * normal(rng);
    const double zo = apply_activation(ch.activation, z) + sd_noise * normal(rng);
    const double lp = log_gauss(z, r_plus, sd_prior);
    const double l1 = log_gauss(z, r_plus, sd_prior);
    const double l2 = log_gauss(z, m_fused, sd_fused);
    const double lq = std::max(l1, l2) + std::log(0.5 * (1.0 + std::exp(-std::abs(l1 - l2))));
    const double e = zo - r_minus;
    logw[i] = lp - lq - 0.5 * gamma_minus * e * e;
    zin[i] = z;
    zout[i] = zo;
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(top)) {
    throw NumericalError("mc_oracle_moments: all importance weights vanish",
                         describe(ch, r_plus, r_minus, gamma_plus, gamma_minus));
  }
  double sw = 0.0, sw2 = 0.0;
  for (auto& l : logw) {
    l = std::exp(l - top);
    sw += l;
    sw2 += l * l;
  }
  MonteCarloMoments out;
  out.effective_samples = sw * sw / sw2;
  if (out.effective_samples < 100.0) {
    std::ostringstream os;
    os << describe(ch, r_plus, r_minus, gamma_plus, gamma_minus)
       << " ess=" << out.effective_samples;
    throw NumericalError("mc_oracle_moments: effective sample size below 100", os.str());
  }

  // Self-normalized estimates; standard errors by the delta method,
  // se^2 ~ sum w_i^2 (g_i - mean)^2 / (sum w_i)^2.
  auto moments = [&](const std::vector<double>& x, double& mean, double& var, double& se_mean,
                     double& se_var) {
    double m = 0.0;
    for (long i = 0; i < n_samples; ++i) m += logw[i] * x[i];
    m /= sw;
    double v = 0.0;
    for (long i = 0; i < n_samples; ++i) v += logw[i] * (x[i] - m) * (x[i] - m);
    v /= sw;
    double a = 0.0, b = 0.0;
    for (long i = 0; i < n_samples; ++i) {
      const double d = x[i] - m;
      const double wi = logw[i] / sw;
      a += wi * wi * d * d;
      const double dv = d * d - v;
      b += wi * wi * dv * dv;
    }
    mean = m;
    var = v;
    se_mean = std::sqrt(a);
    se_var = std::sqrt(b);
  };
  moments(zin, out.estimate.mean_in, out.estimate.var_in, out.std_error.mean_in,
          out.std_error.var_in);
  moments(zout, out.estimate.mean_out, out.estimate.var_out, out.std_error.mean_out,
          out.std_error.var_out);
  return out;
}

double channel_output_second_moment(const ScalarChannel& ch, double mean, double var) {
  if (!(var >= 0.0)) throw NumericalError("channel_output_second_moment: negative variance");
  if (var == 0.0) {
    const double v = apply_activation(ch.activation, mean);
    return v * v + ch.noise_var;
  }
  const double sd = std::sqrt(var);
  double total = 0.0;
  for (const auto& p : affine_pieces(ch.activation)) {
    const auto tm = special::truncated_normal(mean, sd, p.lo, p.hi);
    const double mass = std::exp(tm.log_mass);
    if (mass == 0.0) continue;
    const double m = p.slope * tm.mean + p.intercept;
    total += mass * (m * m + p.slope * p.slope * tm.var);
  }
  return total + ch.noise_var;
}

}  // namespace mlvamp
