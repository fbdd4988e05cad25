#pragma once

// Scalar Gaussian special functions with tail-safe evaluation.

namespace mlvamp::special {

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double norm_pdf(double x);
double norm_cdf(double x);
// log Phi(x), accurate for x far into the lower tail.
double log_norm_cdf(double x);
// Inverse of the standard normal cdf, p in (0, 1).
double norm_quantile(double p);

// lambda(a) - a where lambda(a) = phi(a) / (1 - Phi(a)) is the inverse Mills ratio of the
// upper tail. Evaluated without cancellation for large a.
double mills_excess(double a);

// Moments of N(mean, sd^2) restricted to (lo, hi). At most one bound may be finite.
struct TruncatedMoments {
  double log_mass;  // log P(lo < X < hi)
  double mean;
  double var;
};
TruncatedMoments truncated_normal(double mean, double sd, double lo, double hi);

}  // namespace mlvamp::special
