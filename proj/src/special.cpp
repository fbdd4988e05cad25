#include "mlvamp/special.hpp"

#include "mlvamp/error.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>

namespace mlvamp::special {

namespace {

// Above this point the upper-tail ratio is taken from the continued fraction.
constexpr double kTailSwitch = 8.0;

// log of the upper tail probability Q(a) = 1 - Phi(a).
double log_upper_tail(double a, double lambda) {
  if (a < kTailSwitch) return std::log(0.5 * std::erfc(a / kSqrt2));
  return -0.5 * a * a - kLogSqrt2Pi - std::log(lambda);
}

}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double log_norm_cdf(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  const double a = -x;
  return log_upper_tail(a, a + mills_excess(a));
}

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("norm_quantile: p must lie in (0, 1)");
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double mills_excess(double a) {
  if (a < kTailSwitch) {
    const double q = 0.5 * std::erfc(a / kSqrt2);
    return norm_pdf(a) / q - a;
  }
  // Laplace continued fraction: lambda(a) = a + 1/(a + 2/(a + 3/(a + ...))).
  double t = a;
  for (int k = 60; k >= 2; --k) t = a + k / t;
  return 1.0 / t;
}

TruncatedMoments truncated_normal(double mean, double sd, double lo, double hi) {
  const bool lo_finite = std::isfinite(lo);
  const bool hi_finite = std::isfinite(hi);
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw NumericalError("truncated_normal: standard deviation must be positive and finite");
  }
  if (!lo_finite && !hi_finite) return {0.0, mean, sd * sd};
  if (lo_finite && hi_finite) {
    throw NumericalError("truncated_normal: two-sided truncation is not supported");
  }
  if (hi_finite) {
    // Reflect onto an upper-tail problem.
    TruncatedMoments m = truncated_normal(-mean, sd, -hi, std::numeric_limits<double>::infinity());
    m.mean = -m.mean;
    return m;
  }
  const double a = (lo - mean) / sd;
  const double delta = mills_excess(a);
  const double lambda = a + delta;
  const double factor = std::max(0.0, 1.0 - lambda * delta);
  return {log_upper_tail(a, lambda), mean + sd * lambda, sd * sd * factor};
}

}  // namespace mlvamp::special
