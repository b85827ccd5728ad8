#pragma once

// Independent numeric oracles for the test suites: adaptive quadrature for
// Gaussian set measures and finite-difference helpers. Everything here is
// deliberately implementation-independent of the library's estimators.

#include <cmath>
#include <functional>

#include "tailprob/numerics.hpp"
#include "tailprob/util.hpp"

namespace oracles {

// Adaptive Simpson on [a,b] with a tolerance relative to the integral's
// scale (a coarse pre-scan estimates it, so sharply peaked integrands with
// tiny values still converge in relative terms).
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double rel_tol = 1e-13, int depth = 32) {
  struct Rec {
    static double run(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb, double whole, double tol,
                      int depth) {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
      return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
             run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
  };
  double scale = 0.0;
  const int panels = 256;
  const double hp = (b - a) / panels;
  std::vector<double> fvals(panels + 1);
  for (int i = 0; i <= panels; ++i) fvals[i] = f(a + i * hp);
  for (int i = 0; i < panels; ++i)
    scale += 0.5 * hp * (std::abs(fvals[i]) + std::abs(fvals[i + 1]));
  const double tol = std::max(1e-300, rel_tol * scale);

  double total = 0.0;
  for (int i = 0; i < panels; i += 2) {
    const double x0 = a + i * hp, x2 = a + (i + 2) * hp;
    const double whole =
        (x2 - x0) / 6.0 * (fvals[i] + 4.0 * fvals[i + 1] + fvals[i + 2]);
    total += Rec::run(f, x0, x2, fvals[i], fvals[i + 1], fvals[i + 2], whole,
                      2.0 * tol / panels, depth);
  }
  return total;
}

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / tailprob::kSqrt2Pi;
}

// P(xi_1 >= z - q(zeta)) for a standard normal in n dimensions, where q is a
// quadratic form in the remaining coordinates; reduces the first coordinate
// to an exact normal tail and integrates the rest by adaptive quadrature.
// n = 2: one quadrature; n = 3: nested quadrature.
inline double paraboloid_measure_2d(double beta, double h11, double tol = 1e-13) {
  auto integrand = [&](double zeta) {
    return std_normal_pdf(zeta) * tailprob::normal_tail(beta - 0.5 * h11 * zeta * zeta);
  };
  return adaptive_simpson(integrand, -16.0, 16.0, tol);
}

inline double paraboloid_measure_3d(double beta, double h11, double h22,
                                    double h12 = 0.0, double tol = 1e-11) {
  auto inner = [&](double z1) {
    auto f = [&](double z2) {
      const double q = 0.5 * (h11 * z1 * z1 + 2.0 * h12 * z1 * z2 + h22 * z2 * z2);
      return std_normal_pdf(z2) * tailprob::normal_tail(beta - q);
    };
    return std_normal_pdf(z1) * adaptive_simpson(f, -13.0, 13.0, tol);
  };
  return adaptive_simpson(inner, -13.0, 13.0, tol);
}

// Ground truth for the planar toy F(theta) = theta_1 + c * theta_2^2 with a
// standard normal parameter: P(z) = E[ Phi(c zeta^2 - z) ].
inline double curved_toy_tail(double z, double c, double tol = 1e-13) {
  auto integrand = [&](double zeta) {
    return std_normal_pdf(zeta) * tailprob::normal_tail(z - c * zeta * zeta);
  };
  return adaptive_simpson(integrand, -16.0, 16.0, tol);
}

// Central finite difference of a scalar function along a direction.
inline double directional_fd(const std::function<double(const tailprob::Vec&)>& f,
                             const tailprob::Vec& x, const tailprob::Vec& dir,
                             double step) {
  return (f(x + step * dir) - f(x - step * dir)) / (2.0 * step);
}

}  // namespace oracles
