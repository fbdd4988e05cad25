#pragma once

#include <cstddef>
#include <string_view>

// Componentwise kernels for the linear-stage solves and the message updates. A scalar
// reference implementation is always available; an AVX2 variant is picked at runtime when
// the CPU supports it. Set MLVAMP_KERNELS=scalar to force the reference path.
namespace mlvamp::kernels {

// Per component n: the Gaussian belief over (u_in, u_out) with
//   gp (x - u_in)^2 + gm (y - u_out)^2 + nu (y - s x - b_bar)^2,
// finite nu. Writes means and variances of x and y.
using SolveFiniteFn = void (*)(std::size_t n, const double* s, const double* u_in,
                               const double* u_out, const double* b_bar, double gp, double gm,
                               double nu, double* mean_in, double* mean_out, double* var_in,
                               double* var_out);

// Same belief with the hard constraint y = s x + b_bar (nu = inf).
using SolveConstrainedFn = void (*)(std::size_t n, const double* s, const double* u_in,
                                    const double* u_out, const double* b_bar, double gp, double gm,
                                    double* mean_in, double* mean_out, double* var_in,
                                    double* var_out);

// x given gp (x - u_in)^2 + nu (y_bar - s x - b_bar)^2 with y_bar observed.
using SolveObservedFn = void (*)(std::size_t n, const double* s, const double* u_in,
                                 const double* y_bar, const double* b_bar, double gp, double nu,
                                 double* mean_in, double* var_in);

// out = (eta * z_hat - g_opp * r_opp) / g_new.
using ExtrinsicFn = void (*)(std::size_t n, double eta, const double* z_hat, double g_opp,
                             const double* r_opp, double g_new, double* out);

using SumSqDiffFn = double (*)(std::size_t n, const double* a, const double* b);
using SumFn = double (*)(std::size_t n, const double* a);

struct KernelTable {
  std::string_view name;
  SolveFiniteFn solve_finite;
  SolveConstrainedFn solve_constrained;
  SolveObservedFn solve_observed;
  ExtrinsicFn extrinsic;
  SumSqDiffFn sum_sq_diff;
  SumFn sum;
};

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// The table used by the library: AVX2 when available unless MLVAMP_KERNELS=scalar.
const KernelTable& active();

}  // namespace mlvamp::kernels
