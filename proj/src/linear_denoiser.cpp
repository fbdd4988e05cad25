#include "mlvamp/linear_denoiser.hpp"

#include "mlvamp/error.hpp"

#include <cmath>
#include <string>

namespace mlvamp {

namespace {

void check_precisions(double gp, double gm) {
  if (!(gp > 0.0) || !std::isfinite(gp)) {
    throw NumericalError("linear denoiser: gamma_plus must be positive and finite",
                         "gamma_plus=" + std::to_string(gp));
  }
  if (!(gm >= 0.0) || !std::isfinite(gm)) {
    throw NumericalError("linear denoiser: gamma_minus must be finite and >= 0",
                         "gamma_minus=" + std::to_string(gm));
  }
}

}  // namespace

ComponentSolve component_solve(double u_in, double u_out, double s, double b_bar,
                               double gamma_plus, double gamma_minus, double nu) {
  check_precisions(gamma_plus, gamma_minus);
  if (!(nu > 0.0)) throw ConfigError("linear denoiser: nu must be positive");
  ComponentSolve c;
  if (nu == kInf) {
    kernels::scalar_table().solve_constrained(1, &s, &u_in, &u_out, &b_bar, gamma_plus,
                                              gamma_minus, &c.g_minus, &c.g_plus, &c.var_in,
                                              &c.var_out);
  } else {
    kernels::scalar_table().solve_finite(1, &s, &u_in, &u_out, &b_bar, gamma_plus, gamma_minus,
                                         nu, &c.g_minus, &c.g_plus, &c.var_in, &c.var_out);
  }
  c.d_plus = gamma_minus * c.var_out;
  c.d_minus = gamma_plus * c.var_in;
  return c;
}

LinearEstimate denoise_linear(const LinearStage& stage, const Vector& r_plus, const Vector& r_minus,
                              double gamma_plus, double gamma_minus,
                              const kernels::KernelTable& k) {
  const Index n_in = stage.n_in();
  const Index n_out = stage.n_out();
  if (r_plus.size() != n_in || r_minus.size() != n_out) {
    throw DimensionError("denoise_linear: message dimensions do not match the stage");
  }
  check_precisions(gamma_plus, gamma_minus);
  const Index rank = stage.rank();
  const double nu = stage.nu;

  const Vector u_in = stage.v_in * r_plus;
  const Vector u_out = stage.v_out.transpose() * r_minus;
  Vector m_in(n_in), v_in(n_in), m_out(n_out), v_out(n_out);

  if (stage.deterministic()) {
    k.solve_constrained(rank, stage.s.data(), u_in.data(), u_out.data(), stage.b_bar.data(),
                        gamma_plus, gamma_minus, m_in.data(), m_out.data(), v_in.data(),
                        v_out.data());
  } else {
    k.solve_finite(rank, stage.s.data(), u_in.data(), u_out.data(), stage.b_bar.data(),
                   gamma_plus, gamma_minus, nu, m_in.data(), m_out.data(), v_in.data(),
                   v_out.data());
  }
  // Coordinates without a singular value: each side keeps only its own information.
  for (Index n = rank; n < n_in; ++n) {
    m_in(n) = u_in(n);
    v_in(n) = 1.0 / gamma_plus;
  }
  for (Index n = rank; n < n_out; ++n) {
    if (stage.deterministic()) {
      m_out(n) = stage.b_bar(n);
      v_out(n) = 0.0;
    } else {
      const double p = gamma_minus + nu;
      m_out(n) = (gamma_minus * u_out(n) + nu * stage.b_bar(n)) / p;
      v_out(n) = 1.0 / p;
    }
  }

  LinearEstimate est;
  est.z_hat_minus = stage.v_in.transpose() * m_in;
  est.z_hat_plus = stage.v_out * m_out;
  est.avg_var_in = k.sum(n_in, v_in.data()) / static_cast<double>(n_in);
  est.avg_var_out = k.sum(n_out, v_out.data()) / static_cast<double>(n_out);
  est.alpha_minus = gamma_plus * est.avg_var_in;
  est.alpha_plus = gamma_minus * est.avg_var_out;
  return est;
}

ObservedEstimate denoise_linear_observed(const LinearStage& stage, const Vector& y,
                                         const Vector& r_plus, double gamma_plus,
                                         const kernels::KernelTable& k) {
  if (y.size() != stage.n_out() || r_plus.size() != stage.n_in()) {
    throw DimensionError("denoise_linear_observed: dimensions do not match the stage");
  }
  check_precisions(gamma_plus, 0.0);
  if (stage.deterministic()) {
    throw ConfigError("denoise_linear_observed: the observed stage needs finite noise precision");
  }
  const Index n_in = stage.n_in();
  const Index rank = stage.rank();
  const Vector u_in = stage.v_in * r_plus;
  const Vector y_bar = stage.v_out.transpose() * y;
  Vector m_in(n_in), v_in(n_in);
  k.solve_observed(rank, stage.s.data(), u_in.data(), y_bar.data(), stage.b_bar.data(),
                   gamma_plus, stage.nu, m_in.data(), v_in.data());
  for (Index n = rank; n < n_in; ++n) {
    m_in(n) = u_in(n);
    v_in(n) = 1.0 / gamma_plus;
  }
  ObservedEstimate est;
  est.z_hat_minus = stage.v_in.transpose() * m_in;
  est.avg_var_in = k.sum(n_in, v_in.data()) / static_cast<double>(n_in);
  est.alpha_minus = gamma_plus * est.avg_var_in;
  return est;
}

}  // namespace mlvamp
