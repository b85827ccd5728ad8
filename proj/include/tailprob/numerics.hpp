#pragma once

#include <cmath>
#include <limits>

namespace tailprob {

inline constexpr double kSqrt2Pi = 2.5066282746310005024;

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// log Phi(-x) for x >= 0, accurate far into the tail where erfc underflows.
inline double log_normal_tail(double x) {
  if (x < 25.0) return std::log(0.5 * std::erfc(x / std::sqrt(2.0)));
  // Asymptotic series for the Mills ratio; relative error < 1e-12 for x >= 25.
  const double x2 = x * x;
  double mills = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(x * kSqrt2Pi) + std::log(mills);
}

/// Tail probability Phi(-x) of the standard normal, x >= 0 allowed large.
inline double normal_tail(double x) {
  if (x < 0.0) return 1.0 - normal_tail(-x);
  return std::exp(log_normal_tail(x));
}

}  // namespace tailprob
