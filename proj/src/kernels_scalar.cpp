#include "mlvamp/kernels.hpp"

namespace mlvamp::kernels {

namespace {

void solve_finite(std::size_t n, const double* s, const double* u_in, const double* u_out,
                  const double* b_bar, double gp, double gm, double nu, double* mean_in,
                  double* mean_out, double* var_in, double* var_out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double sv = s[i];
    const double ns = nu * sv;
    const double p11 = gp + ns * sv;
    const double p22 = gm + nu;
    const double inv_det = 1.0 / (gp * gm + gp * nu + gm * ns * sv);
    const double d1 = gp * u_in[i] - ns * b_bar[i];
    const double d2 = gm * u_out[i] + nu * b_bar[i];
    mean_in[i] = (p22 * d1 + ns * d2) * inv_det;
    mean_out[i] = (ns * d1 + p11 * d2) * inv_det;
    var_in[i] = p22 * inv_det;
    var_out[i] = p11 * inv_det;
  }
}

void solve_constrained(std::size_t n, const double* s, const double* u_in, const double* u_out,
                       const double* b_bar, double gp, double gm, double* mean_in,
                       double* mean_out, double* var_in, double* var_out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double sv = s[i];
    const double v = 1.0 / (gp + gm * sv * sv);
    const double m = (gp * u_in[i] + gm * sv * (u_out[i] - b_bar[i])) * v;
    mean_in[i] = m;
    mean_out[i] = sv * m + b_bar[i];
    var_in[i] = v;
    var_out[i] = sv * sv * v;
  }
}

void solve_observed(std::size_t n, const double* s, const double* u_in, const double* y_bar,
                    const double* b_bar, double gp, double nu, double* mean_in, double* var_in) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ns = nu * s[i];
    const double v = 1.0 / (gp + ns * s[i]);
    mean_in[i] = (gp * u_in[i] + ns * (y_bar[i] - b_bar[i])) * v;
    var_in[i] = v;
  }
}

void extrinsic(std::size_t n, double eta, const double* z_hat, double g_opp, const double* r_opp,
               double g_new, double* out) {
  const double inv = 1.0 / g_new;
  for (std::size_t i = 0; i < n; ++i) out[i] = (eta * z_hat[i] - g_opp * r_opp[i]) * inv;
}

double sum_sq_diff(std::size_t n, const double* a, const double* b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double sum(std::size_t n, const double* a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar",   solve_finite, solve_constrained, solve_observed,
                                 extrinsic,  sum_sq_diff,  sum};
  return table;
}

}  // namespace mlvamp::kernels
