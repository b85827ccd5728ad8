#include "tailprob/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tailprob/numerics.hpp"

namespace tailprob::est {

namespace {

constexpr double kZ95 = 1.959963984540054;

double safe_log10(double logp_e) { return logp_e / std::log(10.0); }

void fill_estimate_logp(ProbabilityEstimate& e, double logp_e) {
  e.p = std::exp(logp_e);
  e.log10_p = safe_log10(logp_e);
}

}  // namespace

SampleBatch run_batch(const EventOracle& oracle, const measures::GaussianMeasure& m,
                      const Vec& center, long count, std::uint64_t seed,
                      unsigned workers) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  SampleBatch batch;
  batch.f.assign(count, std::numeric_limits<double>::quiet_NaN());
  batch.logw.assign(count, 0.0);
  // direction of the importance weight exponent
  const Vec wdir = m.apply_cov_inverse(center - m.mean());
  const bool shifted = wdir.cwiseAbs().maxCoeff() > 0.0;
  std::vector<char> failed(count, 0);

  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    std::normal_distribution<double> normal;
    Vec zeta(m.dim());
    for (int i = 0; i < m.dim(); ++i) zeta(i) = normal(rng);
    const Vec delta = m.apply_sqrt_cov(zeta);
    const Vec theta = center + delta;
    if (shifted) batch.logw[k] = -delta.dot(wdir);
    try {
      batch.f[k] = oracle(theta);
    } catch (const std::exception&) {
      failed[k] = 1;
    }
  });
  for (long k = 0; k < count; ++k) batch.failures += failed[k];
  if (batch.failures * 100 > count)
    throw SolverError("more than 1% of sample evaluations failed (" +
                      std::to_string(batch.failures) + " of " +
                      std::to_string(count) + ")");
  return batch;
}

ProbabilityEstimate mc_estimate_from_batch(const SampleBatch& batch, double z) {
  ProbabilityEstimate e;
  e.method = "mc";
  e.z = z;
  e.n_samples = static_cast<long>(batch.f.size());
  e.failures = batch.failures;
  const long n = batch.effective();
  long hits = 0;
  for (double f : batch.f)
    if (!std::isnan(f) && f >= z) ++hits;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  e.p = p;
  e.log10_p = p > 0.0 ? std::log10(p) : -std::numeric_limits<double>::infinity();
  const double half = kZ95 * std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
  e.ci_low = std::max(0.0, p - half);
  e.ci_high = std::min(1.0, p + half);
  return e;
}

ProbabilityEstimate mc_estimate(const EventOracle& oracle,
                                const measures::GaussianMeasure& m, double z,
                                long count, std::uint64_t seed, unsigned workers) {
  const SampleBatch batch = run_batch(oracle, m, m.mean(), count, seed, workers);
  return mc_estimate_from_batch(batch, z);
}

std::vector<ProbabilityEstimate> mc_curve(const EventOracle& oracle,
                                          const measures::GaussianMeasure& m,
                                          const std::vector<double>& z_grid,
                                          long count, std::uint64_t seed,
                                          unsigned workers) {
  const SampleBatch batch = run_batch(oracle, m, m.mean(), count, seed, workers);
  std::vector<ProbabilityEstimate> curve;
  curve.reserve(z_grid.size());
  for (double z : z_grid) curve.push_back(mc_estimate_from_batch(batch, z));
  return curve;
}

ProbabilityEstimate is_estimate_from_batch(const SampleBatch& batch,
                                           double i_star, double z) {
  ProbabilityEstimate e;
  e.method = "is";
  e.z = z;
  e.i_star = i_star;
  e.n_samples = static_cast<long>(batch.f.size());
  e.failures = batch.failures;
  const long n = batch.effective();

  double wmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < batch.f.size(); ++k)
    if (!std::isnan(batch.f[k]) && batch.f[k] >= z)
      wmax = std::max(wmax, batch.logw[k]);
  if (!std::isfinite(wmax)) {  // no hits
    e.p = 0.0;
    e.ci_low = e.ci_high = 0.0;
    return e;
  }
  // shifted summand a_k = exp(logw - wmax); mean and spread in shifted space
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < batch.f.size(); ++k) {
    if (std::isnan(batch.f[k]) || batch.f[k] < z) continue;
    const double a = std::exp(batch.logw[k] - wmax);
    sum += a;
    sum2 += a * a;
  }
  const double mean_shifted = sum / n;
  const double var_shifted =
      n > 1 ? std::max(0.0, (sum2 - n * mean_shifted * mean_shifted) / (n - 1.0))
            : 0.0;
  const double log_p = -i_star + wmax + std::log(mean_shifted);
  fill_estimate_logp(e, log_p);
  const double half =
      kZ95 * std::exp(-i_star + wmax) * std::sqrt(var_shifted / n);
  e.ci_low = std::max(0.0, e.p - half);
  e.ci_high = e.p + half;
  return e;
}

ProbabilityEstimate is_estimate(const EventOracle& oracle,
                                const measures::GaussianMeasure& m,
                                const opt::OptimumRecord& record, double z,
                                long count, std::uint64_t seed, unsigned workers) {
  const SampleBatch batch =
      run_batch(oracle, m, record.theta_star, count, seed, workers);
  return is_estimate_from_batch(batch, record.rate, z);
}

ProbabilityEstimate form_estimate(const opt::OptimumRecord& record) {
  ProbabilityEstimate e;
  e.method = "form";
  e.z = record.z;
  e.i_star = record.rate;
  const double beta = std::sqrt(2.0 * record.rate);
  const double logp = log_normal_tail(beta);
  fill_estimate_logp(e, logp);
  e.asymptotic_bound =
      beta > 0.0 ? std::exp(-record.rate) / (kSqrt2Pi * beta)
                 : std::numeric_limits<double>::infinity();
  return e;
}

ProbabilityEstimate sorm_from_spectrum(double z, double i_star,
                                       const SormSpectrum& spectrum,
                                       const std::string& method) {
  double log_correction = 0.0;
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) {
    const double factor = 1.0 - spectrum.lambda * spectrum.eigenvalues(i);
    if (factor <= 0.0)
      throw SolverError(
          "second-order positivity hypothesis violated: 1 - lambda*eig = " +
          std::to_string(factor) + " at eigenvalue " + std::to_string(i + 1) +
          " (" + std::to_string(spectrum.eigenvalues(i)) + ")");
    log_correction -= 0.5 * std::log(factor);
  }
  ProbabilityEstimate e;
  e.method = method;
  e.z = z;
  e.i_star = i_star;
  e.n_eigs = static_cast<int>(spectrum.eigenvalues.size());
  const double beta = std::sqrt(2.0 * i_star);
  const double logp = -i_star - std::log(kSqrt2Pi * beta) + log_correction;
  fill_estimate_logp(e, logp);
  return e;
}

std::pair<ProbabilityEstimate, SormSpectrum> sorm_estimate_dense(
    const opt::OptimumRecord& record, const measures::GaussianMeasure& m,
    const Mat& event_hessian) {
  const int n = m.dim();
  const double scale = std::max(1.0, event_hessian.cwiseAbs().maxCoeff());
  if ((event_hessian - event_hessian.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * scale)
    throw std::invalid_argument("event Hessian is not symmetric");
  const Mat H = 0.5 * (event_hessian + event_hessian.transpose());

  const measures::WhiteningMap w = measures::build_whitening(m, record.theta_star);
  const Mat Mfull = w.R.transpose() * m.sqrt_cov() * H * m.sqrt_cov() * w.R;
  const Mat Mproj = Mfull.bottomRightCorner(n - 1, n - 1);

  Eigen::SelfAdjointEigenSolver<Mat> eig(Mproj);
  Vec vals = eig.eigenvalues();
  std::sort(vals.data(), vals.data() + vals.size(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });

  SormSpectrum spectrum{vals, record.lambda, n};
  return {sorm_from_spectrum(record.z, record.rate, spectrum, "sorm"), spectrum};
}

std::pair<ProbabilityEstimate, SormSpectrum> sorm_estimate_lowrank(
    const opt::OptimumRecord& record, const measures::GaussianMeasure& m,
    const HessianApply& hessian_apply, int rank, double tol, std::uint64_t seed) {
  const int n = m.dim();
  rank = std::min(rank, n - 1);
  if (rank < 0) throw std::invalid_argument("rank must be nonnegative");

  SormSpectrum spectrum{Vec(0), record.lambda, n};
  if (rank == 0)
    return {sorm_from_spectrum(record.z, record.rate, spectrum, "sorm-lowrank"),
            spectrum};

  const measures::WhiteningMap w = measures::build_whitening(m, record.theta_star);
  auto apply_projected = [&](const Vec& y) -> Vec {
    Vec x = Vec::Zero(n);
    x.tail(n - 1) = y;
    const Vec lifted = m.sqrt_cov() * (w.R * x);
    const Vec back = w.R.transpose() * (m.sqrt_cov() * hessian_apply(lifted));
    return back.tail(n - 1);
  };

  const int l = std::min(n - 1, rank + 5);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Mat omega(n - 1, l);
  for (int c = 0; c < l; ++c)
    for (int r2 = 0; r2 < n - 1; ++r2) omega(r2, c) = normal(rng);

  auto apply_block = [&](const Mat& X) {
    Mat Y(n - 1, X.cols());
    for (int c = 0; c < X.cols(); ++c) Y.col(c) = apply_projected(X.col(c));
    return Y;
  };
  auto orthonormalize = [](const Mat& X) {
    Eigen::HouseholderQR<Mat> qr(X);
    return Mat(qr.householderQ() * Mat::Identity(X.rows(), X.cols()));
  };

  Mat Q = orthonormalize(apply_block(omega));
  for (int pass = 0; pass < 2; ++pass) Q = orthonormalize(apply_block(Q));
  const Mat B = apply_block(Q);
  Mat T = Q.transpose() * B;
  T = 0.5 * (T + T.transpose());

  Eigen::SelfAdjointEigenSolver<Mat> eig(T);
  Vec vals = eig.eigenvalues();
  std::sort(vals.data(), vals.data() + vals.size(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });

  std::vector<double> kept;
  for (Eigen::Index i = 0; i < vals.size() && static_cast<int>(kept.size()) < rank;
       ++i) {
    if (std::abs(record.lambda * vals(i)) < tol) break;  // sorted by |.|
    kept.push_back(vals(i));
  }
  spectrum.eigenvalues = Eigen::Map<const Vec>(kept.data(), kept.size());
  return {sorm_from_spectrum(record.z, record.rate, spectrum, "sorm-lowrank"),
          spectrum};
}

RateInterpolant::RateInterpolant(const opt::SweepResult& sweep) {
  for (const auto& rec : sweep.records) {
    if (!rec.converged) continue;
    zs_.push_back(rec.z);
    rates_.push_back(rec.rate);
  }
  if (zs_.size() < 2)
    throw std::invalid_argument("need at least two converged sweep records");
  for (std::size_t i = 1; i < zs_.size(); ++i)
    if (zs_[i] <= zs_[i - 1])
      throw std::invalid_argument("sweep z values must be increasing for interpolation");
}

double RateInterpolant::operator()(double z) const {
  std::size_t hi = 1;
  while (hi + 1 < zs_.size() && zs_[hi] < z) ++hi;
  const double t = (z - zs_[hi - 1]) / (zs_[hi] - zs_[hi - 1]);
  return rates_[hi - 1] + t * (rates_[hi] - rates_[hi - 1]);
}

FitResult fit_constant_prefactor(const std::vector<ZP>& mc_curve,
                                 const opt::SweepResult& sweep, double z_lo,
                                 double z_hi) {
  const RateInterpolant istar(sweep);
  double acc = 0.0;
  int used = 0;
  for (const auto& [z, p] : mc_curve) {
    if (z < z_lo || z > z_hi || !(p > 0.0)) continue;
    acc += std::log(p) + istar(z);
    ++used;
  }
  if (used == 0)
    throw std::invalid_argument("fit window does not overlap the MC curve");
  FitResult fit;
  fit.c0 = std::exp(acc / used);
  for (const auto& rec : sweep.records) {
    if (!rec.converged) continue;
    fit.curve.push_back({rec.z, fit.c0 * std::exp(-rec.rate)});
  }
  return fit;
}

std::vector<ZP> prefactor_extract(const std::vector<ProbabilityEstimate>& curve,
                                  const opt::SweepResult& sweep) {
  const RateInterpolant istar(sweep);
  std::vector<ZP> out;
  out.reserve(curve.size());
  for (const auto& e : curve) {
    if (!(e.p > 0.0) && !std::isfinite(e.log10_p)) {
      out.push_back({e.z, 0.0});
      continue;
    }
    const double logp = e.log10_p * std::log(10.0);
    out.push_back({e.z, std::exp(logp + istar(e.z))});
  }
  return out;
}

}  // namespace tailprob::est
