#include "tailprob/measures.hpp"

#include <cmath>
#include <random>

namespace tailprob::measures {

namespace {

void check_dim(const char* op, int expected, const Vec& v) {
  if (v.size() != expected)
    throw std::invalid_argument(std::string(op) + ": expected dimension " +
                                std::to_string(expected) + ", got " +
                                std::to_string(v.size()));
}

}  // namespace

GaussianMeasure::GaussianMeasure(Vec mean, Mat covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  const auto n = mean_.size();
  if (cov_.rows() != n || cov_.cols() != n)
    throw std::invalid_argument("covariance shape does not match mean length");
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("covariance is not symmetric");
  cov_ = 0.5 * (cov_ + cov_.transpose());

  Eigen::SelfAdjointEigenSolver<Mat> eig(cov_);
  if (eig.info() != Eigen::Success)
    throw std::invalid_argument("covariance eigendecomposition failed");
  const Vec& evals = eig.eigenvalues();
  if (evals.minCoeff() <= 0.0)
    throw std::invalid_argument("covariance is not positive definite (min eigenvalue " +
                                std::to_string(evals.minCoeff()) + ")");
  // Symmetric square root; SORM's affine transform treats C^{1/2} as symmetric.
  sqrt_cov_ = eig.eigenvectors() * evals.cwiseSqrt().asDiagonal() *
              eig.eigenvectors().transpose();
  sqrt_cov_inv_ = eig.eigenvectors() * evals.cwiseSqrt().cwiseInverse().asDiagonal() *
                  eig.eigenvectors().transpose();
  cov_llt_.compute(cov_);
}

Vec GaussianMeasure::apply_cov_inverse(const Vec& x) const {
  return cov_llt_.solve(x);
}

Vec GaussianMeasure::apply_sqrt_cov_inverse(const Vec& x) const {
  return sqrt_cov_inv_ * x;
}

ExponentialMeasure::ExponentialMeasure(Vec r) : rates(std::move(r)) {
  if (rates.size() == 0) throw std::invalid_argument("rates must be nonempty");
  if (rates.minCoeff() <= 0.0)
    throw std::invalid_argument("exponential rates must be strictly positive");
}

Vec WhiteningMap::to_whitened(const Vec& theta) const {
  // A^{-1} = R^T C^{-1/2}; A is a product of an orthogonal and an SPD factor,
  // so a direct solve is stable.
  return A.colPivHouseholderQr().solve(theta - theta0);
}

double gaussian_rate(const GaussianMeasure& m, const Vec& theta) {
  check_dim("gaussian_rate", m.dim(), theta);
  const Vec d = theta - m.mean();
  return 0.5 * d.dot(m.apply_cov_inverse(d));
}

Vec gaussian_rate_grad(const GaussianMeasure& m, const Vec& theta) {
  check_dim("gaussian_rate_grad", m.dim(), theta);
  return m.apply_cov_inverse(theta - m.mean());
}

double gaussian_cgf(const GaussianMeasure& m, const Vec& eta) {
  check_dim("gaussian_cgf", m.dim(), eta);
  return eta.dot(m.mean()) + 0.5 * eta.dot(m.apply_cov(eta));
}

Vec gaussian_cgf_grad(const GaussianMeasure& m, const Vec& eta) {
  check_dim("gaussian_cgf_grad", m.dim(), eta);
  return m.mean() + m.apply_cov(eta);
}

double exponential_rate(const ExponentialMeasure& m, const Vec& theta) {
  check_dim("exponential_rate", m.dim(), theta);
  if ((theta.array() <= 0.0).any()) return kInfiniteRate;
  // Legendre transform of the cgf -sum log(1 - eta/alpha): vanishes at the
  // mean theta_k = 1/alpha_k.
  double r = 0.0;
  for (int k = 0; k < theta.size(); ++k) {
    const double a = m.rates(k) * theta(k);
    r += a - 1.0 - std::log(a);
  }
  return r;
}

double exponential_cgf(const ExponentialMeasure& m, const Vec& eta) {
  check_dim("exponential_cgf", m.dim(), eta);
  if ((eta.array() >= m.rates.array()).any()) return kInfiniteRate;
  double s = 0.0;
  for (int k = 0; k < eta.size(); ++k)
    s -= std::log(1.0 - eta(k) / m.rates(k));
  return s;
}

Vec exponential_cgf_grad(const ExponentialMeasure& m, const Vec& eta) {
  check_dim("exponential_cgf_grad", m.dim(), eta);
  return (m.rates - eta).cwiseInverse();
}

CgfWithGradient make_cgf(const GaussianMeasure& m) {
  return {[&m](const Vec& eta) { return gaussian_cgf(m, eta); },
          [&m](const Vec& eta) { return gaussian_cgf_grad(m, eta); }};
}

CgfWithGradient make_cgf(const ExponentialMeasure& m) {
  return {[&m](const Vec& eta) { return exponential_cgf(m, eta); },
          [&m](const Vec& eta) { return exponential_cgf_grad(m, eta); }};
}

double legendre_numeric(const CgfWithGradient& cgf, const Vec& theta,
                        int max_iter, double grad_tol) {
  // Ascent on the concave eta -> <eta,theta> - S(eta) with (non-monotone)
  // Barzilai-Borwein steps; steps are halved only to stay inside the cgf
  // domain. A value-monotone search cannot certify gradients below the
  // roundoff of the value, which the 1e-10 gradient tolerance requires.
  Vec eta = Vec::Zero(theta.size());
  Vec g = theta - cgf.gradient(eta);
  const double tol = grad_tol * std::max(1.0, theta.norm());
  double step = 1.0 / std::max(1.0, g.norm());
  Vec eta_prev = eta, g_prev = g;
  for (int it = 0; it < max_iter; ++it) {
    if (g.norm() <= tol) return theta.dot(eta) - cgf.value(eta);
    bool inside = false;
    for (int bt = 0; bt < 200; ++bt) {
      const Vec trial = eta + step * g;
      if (std::isfinite(cgf.value(trial))) {
        eta_prev = eta;
        g_prev = g;
        eta = trial;
        inside = true;
        break;
      }
      step *= 0.5;
    }
    if (!inside)
      throw SolverError("legendre_numeric: cannot stay inside the cgf domain");
    g = theta - cgf.gradient(eta);
    const Vec ds = eta - eta_prev;
    const Vec dy = g_prev - g;
    const double sy = ds.dot(dy);
    step = sy > 0.0 ? ds.squaredNorm() / sy : step;
    if (!std::isfinite(step) || step <= 0.0) step = 1.0;
  }
  throw SolverError("legendre_numeric: no convergence after " +
                    std::to_string(max_iter) + " iterations (last gradient norm " +
                    std::to_string(g.norm()) + ")");
}

std::vector<Vec> sample(const GaussianMeasure& m, std::uint64_t seed, int count) {
  std::vector<Vec> out;
  if (count <= 0) return out;
  out.reserve(count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec zeta(m.dim());
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < m.dim(); ++i) zeta(i) = normal(rng);
    out.push_back(m.mean() + m.apply_sqrt_cov(zeta));
  }
  return out;
}

WhiteningMap build_whitening(const GaussianMeasure& m, const Vec& theta_star) {
  check_dim("build_whitening", m.dim(), theta_star);
  const int n = m.dim();
  const Vec y = m.apply_sqrt_cov_inverse(theta_star - m.mean());
  const double ynorm = y.norm();
  if (ynorm <= 1e-14 * std::max(1.0, theta_star.norm()))
    throw std::invalid_argument("build_whitening: theta* coincides with the mean, "
                                "no descent direction");
  const Vec yhat = y / ynorm;

  // Householder reflection sending yhat to -sign(yhat_1) e1, then a sign flip
  // of the first coordinate so the image is +e1. R^T = D H, R = H D.
  Mat R;
  const double s = yhat(0) >= 0.0 ? 1.0 : -1.0;
  Vec v = yhat;
  v(0) += s;
  const double vnorm2 = v.squaredNorm();
  if (vnorm2 < 1e-30) {
    R = Mat::Identity(n, n);
    if (s < 0.0) R(0, 0) = -1.0;  // unreachable for unit yhat, kept for safety
  } else {
    Mat H = Mat::Identity(n, n) - (2.0 / vnorm2) * (v * v.transpose());
    Mat D = Mat::Identity(n, n);
    D(0, 0) = -s;
    R = H * D;
  }

  WhiteningMap w;
  w.R = R;
  w.A = m.sqrt_cov() * R;
  w.theta0 = m.mean();
  w.xi_star = Vec::Zero(n);
  w.xi_star(0) = ynorm;

  const double orth_err = (R.transpose() * R - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  if (orth_err > 1e-10)
    throw SolverError("build_whitening: rotation lost orthogonality (" +
                      std::to_string(orth_err) + ")");
  const Vec check = R.transpose() * yhat;
  if (std::abs(check(0) - 1.0) > 1e-10 ||
      check.tail(n - 1).cwiseAbs().maxCoeff() > 1e-10)
    throw SolverError("build_whitening: direction not aligned with e1");
  return w;
}

namespace {

Mat cov_from_json(const nlohmann::json& j, int n) {
  if (j.contains("diag")) {
    const auto d = j.at("diag").get<std::vector<double>>();
    if (static_cast<int>(d.size()) != n)
      throw ConfigError("measure: diag length does not match mean length");
    Mat C = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) C(i, i) = d[i];
    return C;
  }
  const auto flat = j.at("cov").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != n * n)
    throw ConfigError("measure: cov must be a row-major array of length n*n");
  Mat C(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) C(r, c) = flat[r * n + c];
  return C;
}

}  // namespace

GaussianMeasure gaussian_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const int n = static_cast<int>(mean.size());
  Vec mu = Eigen::Map<const Vec>(mean.data(), n);
  return GaussianMeasure(mu, cov_from_json(j, n));
}

nlohmann::json gaussian_to_json(const GaussianMeasure& m) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(m.mean().data(), m.mean().data() + m.dim());
  std::vector<double> flat;
  flat.reserve(m.dim() * m.dim());
  for (int r = 0; r < m.dim(); ++r)
    for (int c = 0; c < m.dim(); ++c) flat.push_back(m.covariance()(r, c));
  j["cov"] = flat;
  return j;
}

ExponentialMeasure exponential_from_json(const nlohmann::json& j) {
  const auto rates = j.at("rates").get<std::vector<double>>();
  return ExponentialMeasure(Eigen::Map<const Vec>(rates.data(), rates.size()));
}

nlohmann::json exponential_to_json(const ExponentialMeasure& m) {
  nlohmann::json j;
  j["rates"] = std::vector<double>(m.rates.data(), m.rates.data() + m.dim());
  return j;
}

}  // namespace tailprob::measures
