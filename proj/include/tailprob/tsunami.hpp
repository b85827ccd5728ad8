#pragma once

#include <memory>
#include <mutex>
#include <optional>

#include "tailprob/adjoint.hpp"
#include "tailprob/estimators.hpp"
#include "tailprob/ldt_opt.hpp"
#include "tailprob/source_model.hpp"
#include "tailprob/swe.hpp"

namespace tailprob::tsunami {

/// Everything that defines one tsunami study: discretization, reference
/// bathymetry, slip basis and prior, observation window, objective softening.
struct Setup {
  swe::Mesh mesh;
  swe::Bathymetry reference;
  source::SlipBasis basis;
  source::SlipPrior prior;
  swe::ObservationWindow window;
  double t_final;
  double dt;
  double eps;
  double gamma;
};

/// Binds the slip parameters to the PDE event map: F(S) is the (softened or
/// time-optimal) average wave height in the window for the bathymetry
/// B0 + O S. Forward solves are cached per slip vector so a value+gradient
/// pair costs one solve plus one adjoint sweep. All closures handed out are
/// safe for concurrent use; the observable-only oracle never touches the
/// cache.
class EventMap {
 public:
  explicit EventMap(Setup setup);

  const Setup& setup() const { return setup_; }

  swe::Bathymetry bathymetry(const Vec& slips) const;

  double f_gamma(const Vec& slips) const;
  Vec f_gamma_grad(const Vec& slips) const;

  /// f^ob at all stored levels for the time-optimal formulation.
  Vec level_trace(const Vec& slips) const;
  Vec f_grad_at_level(const Vec& slips, int level) const;
  double f_time_derivative(const Vec& slips, int level) const;

  /// Full forward solve with observable recording (uncached).
  swe::StateTrajectory solve(const Vec& slips) const;

  opt::Problem make_problem() const;
  opt::TimeProblem make_time_problem() const;

  /// Lightweight sampling oracles (no level storage).
  est::EventOracle oracle_regularized() const;
  est::EventOracle oracle_timeopt() const;

  /// Central-difference Hessian application of F_gamma at a fixed point;
  /// directions are normalized internally and rescaled by linearity.
  /// base_step <= 0 picks 1e-4 * (1 + |point|).
  est::HessianApply hessian_apply_at(const Vec& point, double base_step = 0.0) const;
  Vec f_hessian_apply(const Vec& point, const Vec& direction,
                      double base_step = 0.0) const;

 private:
  std::shared_ptr<const swe::StateTrajectory> cached_trajectory(const Vec& slips) const;

  Setup setup_;
  mutable std::mutex cache_mutex_;
  mutable std::shared_ptr<const swe::StateTrajectory> cache_traj_;
  mutable Vec cache_key_;
};

}  // namespace tailprob::tsunami
