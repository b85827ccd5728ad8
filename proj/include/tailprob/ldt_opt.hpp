#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tailprob/util.hpp"

namespace tailprob::opt {

/// A finite-dimensional LDT problem: rate function with gradient, event map
/// F with gradient, and the covariance used as gradient preconditioner.
/// rate() returns the infinite-rate sentinel outside the support; the
/// optimizer never evaluates F at such points.
struct Problem {
  int dim;
  std::function<double(const Vec&)> rate;
  std::function<Vec(const Vec&)> rate_grad;
  std::function<double(const Vec&)> f_value;
  std::function<Vec(const Vec&)> f_grad;
  Mat preconditioner;  // C

  // Optional second-order hooks (second_order_check, SORM):
  std::function<Vec(const Vec&, const Vec&)> rate_hess_apply;  // (theta,v) -> I''(theta) v
  std::function<Vec(const Vec&, const Vec&)> f_hess_apply;     // (theta,v) -> F''(theta) v
};

struct IterationRecord {
  double hamiltonian;
  double grad_norm;  // C-weighted
  double step;
};

struct OptimumRecord {
  double lambda = 0.0;
  Vec theta_star;
  double z = 0.0;     // F(theta*)
  double rate = 0.0;  // I(theta*)
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string note;  // failure context when not converged
  std::vector<IterationRecord> history;
  std::string objective_kind = "generic";
  int level_star = -1;      // time-optimal: argmax level
  double t_star = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<OptimumRecord> records;
  bool warm_started = false;
};

struct Tolerances {
  double grad_reduction = 1e-5;  // stop when ||grad H||_C falls by this factor
  int max_iter = 500;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double alpha0 = 1.0;
  int max_backtracks = 60;
};

/// Minimizes H = I - lambda F by steepest descent preconditioned with the
/// covariance, Armijo backtracking (step carried over between iterations,
/// doubled on first-try acceptance). Iteration-cap or line-search stall
/// returns a record flagged non-converged rather than throwing.
OptimumRecord minimize_hamiltonian(const Problem& problem, double lambda,
                                   const Vec& start, const Tolerances& tol = {});

/// ||grad I - lambda grad F||_C / max(||grad I||_C, ||lambda grad F||_C).
double kkt_residual(const Problem& problem, const Vec& theta, double lambda);

/// Runs minimize_hamiltonian over an ascending lambda grid. Warm starts from
/// the previous optimizer (default); cold mode restarts every entry from
/// `start` (the mode used for iteration counting). Individual failures are
/// recorded and the sweep continues.
SweepResult sweep_lambda(const Problem& problem, const std::vector<double>& lambdas,
                         bool warm_start, const Vec& start, const Tolerances& tol = {});

struct SecondOrderReport {
  double min_value;  // min over probes of <v,(I''-lambda F'')v>/|v|^2, v tangent
  std::vector<double> values;
  bool positive;  // min >= -1e-6 * scale
};

/// Samples random directions in the tangent space {v : <grad I(theta*),v>=0}
/// and reports the minimal curvature of the Hamiltonian there; feeds SORM's
/// positivity prerequisite.
SecondOrderReport second_order_check(const Problem& problem,
                                     const OptimumRecord& record, int probes,
                                     std::uint64_t seed = 7);

/// Time-dependent event map for the time-optimal formulation: one forward
/// solve yields the observable at all stored levels; gradients are taken at
/// a fixed level.
struct TimeProblem {
  int dim;
  std::function<double(const Vec&)> rate;
  std::function<Vec(const Vec&)> rate_grad;
  Mat preconditioner;
  std::function<Vec(const Vec&)> trace;  // f^ob at all levels
  double dt = 0.0;
  std::function<Vec(const Vec&, int)> f_grad_at_level;
  std::function<double(const Vec&, int)> f_time_derivative;  // d f^ob/dt at level
};

/// Alternating scheme: pick the argmax level, take one preconditioned
/// descent step at that fixed level, repeat. Converged when the S-gradient
/// criterion holds and |dJ/dt| at the selected level is below the
/// level-resolution bound lambda * max_m |second difference of f| / dt.
OptimumRecord minimize_timeopt(const TimeProblem& problem, double lambda,
                               const Vec& start, const Tolerances& tol = {});

SweepResult sweep_lambda_timeopt(const TimeProblem& problem,
                                 const std::vector<double>& lambdas,
                                 bool warm_start, const Vec& start,
                                 const Tolerances& tol = {});

}  // namespace tailprob::opt
