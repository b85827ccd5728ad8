#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tailprob/ldt_opt.hpp"
#include "tailprob/measures.hpp"

namespace tailprob::est {

struct ProbabilityEstimate {
  double z = 0.0;
  double p = 0.0;
  double log10_p = -std::numeric_limits<double>::infinity();
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  std::string method;
  long n_samples = 0;
  int n_eigs = -1;
  double i_star = std::numeric_limits<double>::quiet_NaN();
  // FORM also reports the asymptotic upper bound exp(-I*)/sqrt(4 pi I*).
  double asymptotic_bound = std::numeric_limits<double>::quiet_NaN();
  long failures = 0;
};

using EventOracle = std::function<double(const Vec&)>;

/// One batch of F evaluations at samples center + C^{1/2} zeta_k, with the
/// importance log-weights -(theta_k - center)^T C^{-1}(center - theta0).
/// Per-sample seeds derive from (seed, k), so results do not depend on the
/// worker count. Oracle failures are recorded as NaN; more than 1% aborts.
struct SampleBatch {
  std::vector<double> f;
  std::vector<double> logw;
  long failures = 0;
  long effective() const { return static_cast<long>(f.size()) - failures; }
};

SampleBatch run_batch(const EventOracle& oracle, const measures::GaussianMeasure& m,
                      const Vec& center, long count, std::uint64_t seed,
                      unsigned workers = 1);

/// Vanilla Monte Carlo indicator mean with a 95% normal-approximation CI.
ProbabilityEstimate mc_estimate(const EventOracle& oracle,
                                const measures::GaussianMeasure& m, double z,
                                long count, std::uint64_t seed,
                                unsigned workers = 1);

/// A threshold sweep reuses one batch of F values for every z (a CDF).
std::vector<ProbabilityEstimate> mc_curve(const EventOracle& oracle,
                                          const measures::GaussianMeasure& m,
                                          const std::vector<double>& z_grid,
                                          long count, std::uint64_t seed,
                                          unsigned workers = 1);

ProbabilityEstimate mc_estimate_from_batch(const SampleBatch& batch, double z);

/// Mean-shift importance sampling from N(theta*, C), weights in log space:
/// p = exp(-I*) mean(1{F>=z} exp(-(theta-theta*)^T C^{-1}(theta*-theta0))).
/// With theta* = theta0 this reduces bit-exactly to mc_estimate.
ProbabilityEstimate is_estimate(const EventOracle& oracle,
                                const measures::GaussianMeasure& m,
                                const opt::OptimumRecord& record, double z,
                                long count, std::uint64_t seed,
                                unsigned workers = 1);

ProbabilityEstimate is_estimate_from_batch(const SampleBatch& batch,
                                           double i_star, double z);

/// Half-space tail Phi(-sqrt(2 I*)) (exact via the complementary error
/// function), plus the asymptotic bound as an auxiliary field.
ProbabilityEstimate form_estimate(const opt::OptimumRecord& record);

/// Eigenvalues of the projected covariance-preconditioned event Hessian
/// P R^T C^{1/2} H C^{1/2} R P^T, descending by magnitude, with the Lagrange
/// multiplier they get scaled by. 1 - lambda*eig must stay positive.
struct SormSpectrum {
  Vec eigenvalues;
  double lambda = 0.0;
  int dim = 0;  // parameter dimension n
};

/// exp(-I*)/sqrt(4 pi I*) * prod_i (1 - lambda eig_i)^{-1/2} over the
/// retained spectrum. Throws when the positivity hypothesis fails.
ProbabilityEstimate sorm_from_spectrum(double z, double i_star,
                                       const SormSpectrum& spectrum,
                                       const std::string& method);

std::pair<ProbabilityEstimate, SormSpectrum> sorm_estimate_dense(
    const opt::OptimumRecord& record, const measures::GaussianMeasure& m,
    const Mat& event_hessian);

using HessianApply = std::function<Vec(const Vec&)>;

/// Matrix-free dominant eigenvalues via randomized subspace iteration
/// (oversampling +5, two power iterations); stops at r eigenvalues or when
/// |lambda*eig| < tol, whichever first.
std::pair<ProbabilityEstimate, SormSpectrum> sorm_estimate_lowrank(
    const opt::OptimumRecord& record, const measures::GaussianMeasure& m,
    const HessianApply& hessian_apply, int rank, double tol = 1e-3,
    std::uint64_t seed = 11);

struct ZP {
  double z;
  double p;
};

/// Interpolates I*(z) piecewise-linearly through the sweep records
/// (extrapolating with the end slopes) — the resolution of the lambda <-> z
/// correspondence used by the fit and prefactor extraction.
class RateInterpolant {
 public:
  explicit RateInterpolant(const opt::SweepResult& sweep);
  double operator()(double z) const;
  double z_min() const { return zs_.front(); }
  double z_max() const { return zs_.back(); }

 private:
  std::vector<double> zs_, rates_;
};

struct FitResult {
  double c0;
  std::vector<ZP> curve;  // C0 exp(-I*(z)) at the sweep z values
};

/// Fits a constant prefactor: C0 = exp(mean over the window of
/// [log p_mc(z) + I*(z)]).
FitResult fit_constant_prefactor(const std::vector<ZP>& mc_curve,
                                 const opt::SweepResult& sweep, double z_lo,
                                 double z_hi);

/// C0(z) = p(z) exp(+I*(z)) for every point of an estimate curve.
std::vector<ZP> prefactor_extract(const std::vector<ProbabilityEstimate>& curve,
                                  const opt::SweepResult& sweep);

}  // namespace tailprob::est
