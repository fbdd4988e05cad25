// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "mlvamp/kernels.hpp"

#include <immintrin.h>

namespace mlvamp::kernels {

const KernelTable& avx2_table_impl();

namespace {

constexpr std::size_t kW = 4;

void solve_finite(std::size_t n, const double* s, const double* u_in, const double* u_out,
                  const double* b_bar, double gp, double gm, double nu, double* mean_in,
                  double* mean_out, double* var_in, double* var_out) {
  const __m256d vgp = _mm256_set1_pd(gp);
  const __m256d vnu = _mm256_set1_pd(nu);
  const __m256d p22 = _mm256_set1_pd(gm + nu);
  const __m256d vgm = _mm256_set1_pd(gm);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d det0 = _mm256_set1_pd(gp * gm + gp * nu);
  std::size_t i = 0;
  for (; i + kW <= n; i += kW) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d bb = _mm256_loadu_pd(b_bar + i);
    const __m256d ns = _mm256_mul_pd(vnu, sv);
    const __m256d nss = _mm256_mul_pd(ns, sv);
    const __m256d p11 = _mm256_add_pd(vgp, nss);
    const __m256d det = _mm256_add_pd(det0, _mm256_mul_pd(vgm, nss));
    const __m256d inv_det = _mm256_div_pd(one, det);
    const __m256d d1 = _mm256_sub_pd(_mm256_mul_pd(vgp, _mm256_loadu_pd(u_in + i)),
                                     _mm256_mul_pd(ns, bb));
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(vgm, _mm256_loadu_pd(u_out + i)),
                                     _mm256_mul_pd(vnu, bb));
    const __m256d m1 = _mm256_add_pd(_mm256_mul_pd(p22, d1), _mm256_mul_pd(ns, d2));
    const __m256d m2 = _mm256_add_pd(_mm256_mul_pd(ns, d1), _mm256_mul_pd(p11, d2));
    _mm256_storeu_pd(mean_in + i, _mm256_mul_pd(m1, inv_det));
    _mm256_storeu_pd(mean_out + i, _mm256_mul_pd(m2, inv_det));
    _mm256_storeu_pd(var_in + i, _mm256_mul_pd(p22, inv_det));
    _mm256_storeu_pd(var_out + i, _mm256_mul_pd(p11, inv_det));
  }
  if (i < n) {
    scalar_table().solve_finite(n - i, s + i, u_in + i, u_out + i, b_bar + i, gp, gm, nu,
                                mean_in + i, mean_out + i, var_in + i, var_out + i);
  }
}

void solve_constrained(std::size_t n, const double* s, const double* u_in, const double* u_out,
                       const double* b_bar, double gp, double gm, double* mean_in,
                       double* mean_out, double* var_in, double* var_out) {
  const __m256d vgp = _mm256_set1_pd(gp);
  const __m256d vgm = _mm256_set1_pd(gm);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kW <= n; i += kW) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d bb = _mm256_loadu_pd(b_bar + i);
    const __m256d ss = _mm256_mul_pd(sv, sv);
    const __m256d v = _mm256_div_pd(one, _mm256_add_pd(vgp, _mm256_mul_pd(vgm, ss)));
    const __m256d gms = _mm256_mul_pd(vgm, sv);
    const __m256d num = _mm256_add_pd(_mm256_mul_pd(vgp, _mm256_loadu_pd(u_in + i)),
                                      _mm256_mul_pd(gms, _mm256_sub_pd(_mm256_loadu_pd(u_out + i), bb)));
    const __m256d m = _mm256_mul_pd(num, v);
    _mm256_storeu_pd(mean_in + i, m);
    _mm256_storeu_pd(mean_out + i, _mm256_add_pd(_mm256_mul_pd(sv, m), bb));
    _mm256_storeu_pd(var_in + i, v);
    _mm256_storeu_pd(var_out + i, _mm256_mul_pd(ss, v));
  }
  if (i < n) {
    scalar_table().solve_constrained(n - i, s + i, u_in + i, u_out + i, b_bar + i, gp, gm,
                                     mean_in + i, mean_out + i, var_in + i, var_out + i);
  }
}

void solve_observed(std::size_t n, const double* s, const double* u_in, const double* y_bar,
                    const double* b_bar, double gp, double nu, double* mean_in, double* var_in) {
  const __m256d vgp = _mm256_set1_pd(gp);
  const __m256d vnu = _mm256_set1_pd(nu);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kW <= n; i += kW) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d ns = _mm256_mul_pd(vnu, sv);
    const __m256d v = _mm256_div_pd(one, _mm256_add_pd(vgp, _mm256_mul_pd(ns, sv)));
    const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y_bar + i), _mm256_loadu_pd(b_bar + i));
    const __m256d num =
        _mm256_add_pd(_mm256_mul_pd(vgp, _mm256_loadu_pd(u_in + i)), _mm256_mul_pd(ns, r));
    _mm256_storeu_pd(mean_in + i, _mm256_mul_pd(num, v));
    _mm256_storeu_pd(var_in + i, v);
  }
  if (i < n) {
    scalar_table().solve_observed(n - i, s + i, u_in + i, y_bar + i, b_bar + i, gp, nu,
                                  mean_in + i, var_in + i);
  }
}

void extrinsic(std::size_t n, double eta, const double* z_hat, double g_opp, const double* r_opp,
               double g_new, double* out) {
  const __m256d veta = _mm256_set1_pd(eta);
  const __m256d vopp = _mm256_set1_pd(g_opp);
  const __m256d inv = _mm256_set1_pd(1.0 / g_new);
  std::size_t i = 0;
  for (; i + kW <= n; i += kW) {
    const __m256d t = _mm256_sub_pd(_mm256_mul_pd(veta, _mm256_loadu_pd(z_hat + i)),
                                    _mm256_mul_pd(vopp, _mm256_loadu_pd(r_opp + i)));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(t, inv));
  }
  if (i < n) scalar_table().extrinsic(n - i, eta, z_hat + i, g_opp, r_opp + i, g_new, out + i);
}

double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum_sq_diff(std::size_t n, const double* a, const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kW <= n; i += kW) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double total = horizontal_sum(acc);
  if (i < n) total += scalar_table().sum_sq_diff(n - i, a + i, b + i);
  return total;
}

double sum(std::size_t n, const double* a) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kW <= n; i += kW) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double total = horizontal_sum(acc);
  if (i < n) total += scalar_table().sum(n - i, a + i);
  return total;
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{"avx2",    solve_finite, solve_constrained, solve_observed,
                                 extrinsic, sum_sq_diff,  sum};
  return table;
}

}  // namespace mlvamp::kernels
