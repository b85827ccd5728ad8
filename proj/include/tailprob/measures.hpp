#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "tailprob/util.hpp"

namespace tailprob::measures {

/// Gaussian measure N(theta0, C) on R^n. Immutable after construction and
/// safe to share across threads. The symmetric square root of C is computed
/// once from an eigendecomposition and cached; construction rejects
/// covariances that are not symmetric positive definite.
class GaussianMeasure {
 public:
  GaussianMeasure(Vec mean, Mat covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Mat& covariance() const { return cov_; }
  const Mat& sqrt_cov() const { return sqrt_cov_; }

  Vec apply_cov(const Vec& x) const { return cov_ * x; }
  Vec apply_cov_inverse(const Vec& x) const;
  Vec apply_sqrt_cov(const Vec& x) const { return sqrt_cov_ * x; }
  Vec apply_sqrt_cov_inverse(const Vec& x) const;

 private:
  Vec mean_;
  Mat cov_;
  Mat sqrt_cov_;
  Mat sqrt_cov_inv_;
  Eigen::LLT<Mat> cov_llt_;
};

/// Product of independent exponential distributions with rates alpha_k > 0.
struct ExponentialMeasure {
  explicit ExponentialMeasure(Vec rates);
  int dim() const { return static_cast<int>(rates.size()); }
  Vec rates;
};

/// Affine change of variables theta = A xi + theta0 with A = C^{1/2} R that
/// maps a standard normal xi to N(theta0, C) and puts the optimizer on the
/// positive first axis: A^{-1}(theta* - theta0) = ||xi*|| e1.
struct WhiteningMap {
  Mat A;        // C^{1/2} R
  Mat R;        // orthogonal
  Vec theta0;
  Vec xi_star;  // only first component nonzero, positive

  Vec to_parameter(const Vec& xi) const { return A * xi + theta0; }
  Vec to_whitened(const Vec& theta) const;
  double xi_norm() const { return xi_star(0); }
};

double gaussian_rate(const GaussianMeasure& m, const Vec& theta);
Vec gaussian_rate_grad(const GaussianMeasure& m, const Vec& theta);
double gaussian_cgf(const GaussianMeasure& m, const Vec& eta);
Vec gaussian_cgf_grad(const GaussianMeasure& m, const Vec& eta);

/// Sum_k (alpha_k theta_k - 1 - log theta_k); infinite-rate sentinel outside
/// the positive orthant.
double exponential_rate(const ExponentialMeasure& m, const Vec& theta);
double exponential_cgf(const ExponentialMeasure& m, const Vec& eta);
Vec exponential_cgf_grad(const ExponentialMeasure& m, const Vec& eta);

/// A convex cumulant generating function together with its gradient.
/// Out-of-domain points are signalled by returning +infinity from value.
struct CgfWithGradient {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

CgfWithGradient make_cgf(const GaussianMeasure& m);
CgfWithGradient make_cgf(const ExponentialMeasure& m);

/// Legendre transform max_eta <eta,theta> - S(eta) by gradient ascent with
/// backtracking, to gradient tolerance 1e-10. Test oracle and fallback for
/// user-supplied measures; the Gaussian/exponential fast paths above do not
/// go through here.
double legendre_numeric(const CgfWithGradient& cgf, const Vec& theta,
                        int max_iter = 2000, double grad_tol = 1e-10);

/// count i.i.d. draws theta = theta0 + C^{1/2} zeta, deterministic per seed.
std::vector<Vec> sample(const GaussianMeasure& m, std::uint64_t seed, int count);

/// Builds the rotation R as a single Householder reflection (plus a sign
/// flip) sending C^{-1/2}(theta* - theta0), normalized, to +e1.
WhiteningMap build_whitening(const GaussianMeasure& m, const Vec& theta_star);

GaussianMeasure gaussian_from_json(const nlohmann::json& j);
nlohmann::json gaussian_to_json(const GaussianMeasure& m);
ExponentialMeasure exponential_from_json(const nlohmann::json& j);
nlohmann::json exponential_to_json(const ExponentialMeasure& m);

}  // namespace tailprob::measures
