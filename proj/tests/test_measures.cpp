#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tailprob/measures.hpp"

using namespace tailprob;
using namespace tailprob::measures;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Mat random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = normal(rng);
  return a * a.transpose() + 0.1 * Mat::Identity(n, n);
}

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("gaussian rate: frozen values") {
  GaussianMeasure m1(vec({0.0}), 4.0 * Mat::Identity(1, 1));
  CHECK(gaussian_rate(m1, vec({0.0})) == doctest::Approx(0.0));
  CHECK(gaussian_rate(m1, vec({2.0})) == doctest::Approx(0.5).epsilon(1e-12));

  GaussianMeasure m2(vec({0.0, 0.0}), Mat::Identity(2, 2));
  CHECK(gaussian_rate(m2, vec({3.0, 4.0})) == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("gaussian rate: nonnegative, zero only at the mean") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    GaussianMeasure m(random_vec(n, rng), random_spd(n, rng));
    const Vec theta = random_vec(n, rng);
    const double r = gaussian_rate(m, theta);
    CHECK(r >= 0.0);
    if ((theta - m.mean()).norm() > 1e-9) CHECK(r > 0.0);
    CHECK(gaussian_rate(m, m.mean()) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("gaussian rate gradient matches central differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    GaussianMeasure m(random_vec(n, rng), random_spd(n, rng));
    const Vec theta = random_vec(n, rng);
    const Vec g = gaussian_rate_grad(m, theta);
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Zero(n);
      e(i) = 1.0;
      const double fd = oracles::directional_fd(
          [&](const Vec& t) { return gaussian_rate(m, t); }, theta, e, 1e-5);
      CHECK(std::abs(fd - g(i)) <= 1e-6 * std::max(1.0, std::abs(g(i))));
    }
  }
}

TEST_CASE("gaussian rate gradient: trivial and hand value") {
  GaussianMeasure m(vec({0.0}), 4.0 * Mat::Identity(1, 1));
  CHECK(gaussian_rate_grad(m, vec({0.0}))(0) == doctest::Approx(0.0));
  CHECK(gaussian_rate_grad(m, vec({2.0}))(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gaussian cgf: frozen values and duality with the rate") {
  GaussianMeasure m(vec({1.0}), Mat::Identity(1, 1));
  CHECK(gaussian_cgf(m, vec({0.0})) == doctest::Approx(0.0));
  CHECK(gaussian_cgf(m, vec({2.0})) == doctest::Approx(4.0).epsilon(1e-12));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    GaussianMeasure g(random_vec(n, rng), random_spd(n, rng));
    const Vec theta = random_vec(n, rng);
    const double via_legendre = legendre_numeric(make_cgf(g), theta);
    const double direct = gaussian_rate(g, theta);
    CHECK(std::abs(via_legendre - direct) <= 1e-6 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  GaussianMeasure m(vec({0.0, 0.0}), Mat::Identity(2, 2));
  CHECK_THROWS_AS(gaussian_rate(m, vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_rate_grad(m, vec({1.0, 2.0, 3.0})), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_cgf(m, vec({1.0})), std::invalid_argument);
}

TEST_CASE("covariance construction rejects asymmetric or indefinite input") {
  Mat bad(2, 2);
  bad << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(GaussianMeasure(vec({0.0, 0.0}), bad), std::invalid_argument);
  Mat indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianMeasure(vec({0.0, 0.0}), indef), std::invalid_argument);
}

TEST_CASE("sqrt_cov reproduces the covariance") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const Mat C = random_spd(n, rng);
    GaussianMeasure m(Vec::Zero(n), C);
    const Mat resid = m.sqrt_cov() * m.sqrt_cov().transpose() - C;
    CHECK(resid.norm() <= 1e-10 * C.norm());
  }
}

TEST_CASE("exponential rate: frozen values and support sentinel") {
  ExponentialMeasure m1(vec({1.0}));
  CHECK(exponential_rate(m1, vec({1.0})) == doctest::Approx(0.0));
  ExponentialMeasure m2(vec({2.0}));
  // 2*1 - 1 - log(2*1)
  CHECK(exponential_rate(m2, vec({1.0})) ==
        doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
  CHECK(is_infinite_rate(exponential_rate(m2, vec({-1.0}))));
  CHECK(is_infinite_rate(exponential_rate(m2, vec({0.0}))));
}

TEST_CASE("exponential rate: minimizer at 1/alpha via grid search") {
  for (const double alpha : {0.5, 1.0, 3.0}) {
    ExponentialMeasure m(vec({alpha}));
    double best_theta = 0.0, best = 1e300;
    for (int k = 1; k <= 4000; ++k) {
      const double t = k * 1e-3;
      const double r = exponential_rate(m, vec({t}));
      if (r < best) {
        best = r;
        best_theta = t;
      }
    }
    CHECK(best_theta == doctest::Approx(1.0 / alpha).epsilon(2e-3));
    CHECK(best == doctest::Approx(0.0).epsilon(1e-5));
  }
  // n = 2
  ExponentialMeasure m(vec({2.0, 0.5}));
  double best = 1e300;
  Vec best_theta(2);
  for (int i = 1; i <= 200; ++i)
    for (int j = 1; j <= 200; ++j) {
      const Vec t = vec({i * 0.02, j * 0.05});
      const double r = exponential_rate(m, t);
      if (r < best) {
        best = r;
        best_theta = t;
      }
    }
  CHECK(best_theta(0) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(best_theta(1) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("legendre transform of the exponential cgf recovers its rate") {
  ExponentialMeasure m(vec({2.0}));
  const double value = legendre_numeric(make_cgf(m), vec({1.0}));
  CHECK(value == doctest::Approx(exponential_rate(m, vec({1.0}))).epsilon(1e-8));
}

TEST_CASE("legendre at the mean is zero") {
  std::mt19937_64 rng(5);
  GaussianMeasure m(vec({1.5, -2.0}), random_spd(2, rng));
  CHECK(legendre_numeric(make_cgf(m), m.mean()) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sampling: determinism, count zero, moments") {
  std::mt19937_64 rng(9);
  GaussianMeasure m(vec({1.0, -2.0, 0.5}), random_spd(3, rng));
  CHECK(sample(m, 1, 0).empty());

  const auto a = sample(m, 123, 5);
  const auto b = sample(m, 123, 5);
  for (int k = 0; k < 5; ++k) CHECK((a[k] - b[k]).norm() == 0.0);

  const int n_draws = 100000;
  const auto draws = sample(m, 77, n_draws);
  Vec mean = Vec::Zero(3);
  for (const auto& d : draws) mean += d;
  mean /= n_draws;
  for (int i = 0; i < 3; ++i) {
    const double sigma = std::sqrt(m.covariance()(i, i));
    CHECK(std::abs(mean(i) - m.mean()(i)) <= 4.0 * sigma / std::sqrt(double(n_draws)));
  }
  Mat cov = Mat::Zero(3, 3);
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose();
  cov /= (n_draws - 1);
  CHECK((cov - m.covariance()).norm() <= 0.05 * m.covariance().norm());
}

TEST_CASE("whitening: aligned case is the identity rotation") {
  GaussianMeasure m(vec({0.0, 0.0}), Mat::Identity(2, 2));
  const auto w = build_whitening(m, vec({3.0, 0.0}));
  CHECK((w.R - Mat::Identity(2, 2)).norm() <= 1e-12);
  CHECK(w.xi_star(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(w.xi_star(1) == doctest::Approx(0.0));
}

TEST_CASE("whitening: rotation moves any optimizer to the first axis") {
  GaussianMeasure m(vec({0.0, 0.0}), Mat::Identity(2, 2));
  const auto w = build_whitening(m, vec({0.0, 5.0}));
  CHECK(w.xi_star(0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(std::abs(w.xi_star(1)) <= 1e-10 * 5.0);
  // A maps xi* back to theta*
  CHECK((w.to_parameter(w.xi_star) - vec({0.0, 5.0})).norm() <= 1e-10);
}

TEST_CASE("whitening: |xi*|^2/2 equals the rate, random instances") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    GaussianMeasure m(random_vec(n, rng), random_spd(n, rng));
    Vec theta = random_vec(n, rng);
    if ((theta - m.mean()).norm() < 1e-6) theta(0) += 1.0;
    const auto w = build_whitening(m, theta);
    CHECK((w.R.transpose() * w.R - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    const double rate = gaussian_rate(m, theta);
    CHECK(0.5 * w.xi_star(0) * w.xi_star(0) ==
          doctest::Approx(rate).epsilon(1e-10));
    // the transported rate is |xi|^2/2 at random whitened points
    const Vec xi = random_vec(n, rng);
    CHECK(gaussian_rate(m, w.to_parameter(xi)) ==
          doctest::Approx(0.5 * xi.squaredNorm()).epsilon(1e-8));
    // to_whitened inverts to_parameter and sends theta* to ||xi*|| e1
    const Vec back = w.to_whitened(theta);
    CHECK(std::abs(back(0) - w.xi_star(0)) <= 1e-8 * std::max(1.0, w.xi_star(0)));
    CHECK(back.tail(n - 1).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, w.xi_star(0)));
  }
}

TEST_CASE("whitening: degenerate direction is rejected") {
  GaussianMeasure m(vec({1.0, 2.0}), Mat::Identity(2, 2));
  CHECK_THROWS_AS(build_whitening(m, vec({1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("measure serialization round-trips") {
  std::mt19937_64 rng(33);
  GaussianMeasure m(vec({1.0, -2.0}), random_spd(2, rng));
  const auto j = gaussian_to_json(m);
  const GaussianMeasure back = gaussian_from_json(j);
  CHECK((back.mean() - m.mean()).norm() == 0.0);
  CHECK((back.covariance() - m.covariance()).norm() == 0.0);

  const nlohmann::json jd = {{"mean", {0.0, 0.0}}, {"diag", {4.0, 9.0}}};
  const GaussianMeasure diag = gaussian_from_json(jd);
  CHECK(diag.covariance()(0, 0) == 4.0);
  CHECK(diag.covariance()(1, 1) == 9.0);
  CHECK(diag.covariance()(0, 1) == 0.0);

  ExponentialMeasure e(vec({2.0, 3.0}));
  const ExponentialMeasure eback = exponential_from_json(exponential_to_json(e));
  CHECK((eback.rates - e.rates).norm() == 0.0);
}
