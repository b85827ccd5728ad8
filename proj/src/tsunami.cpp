#include "tailprob/tsunami.hpp"

#include <cmath>

namespace tailprob::tsunami {

EventMap::EventMap(Setup setup) : setup_(std::move(setup)) {
  if (setup_.basis.patches() != setup_.prior.measure.dim())
    throw ConfigError("slip basis and prior disagree on the patch count");
}

swe::Bathymetry EventMap::bathymetry(const Vec& slips) const {
  return source::bathymetry_from_slips(setup_.basis, slips, setup_.reference,
                                       setup_.mesh);
}

swe::StateTrajectory EventMap::solve(const Vec& slips) const {
  const swe::Bathymetry b = bathymetry(slips);
  return swe::solve_forward(setup_.mesh, b, setup_.t_final, setup_.dt,
                            setup_.eps, &setup_.window);
}

std::shared_ptr<const swe::StateTrajectory> EventMap::cached_trajectory(
    const Vec& slips) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_traj_ && cache_key_.size() == slips.size() && cache_key_ == slips)
      return cache_traj_;
  }
  auto traj = std::make_shared<const swe::StateTrajectory>(solve(slips));
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_key_ = slips;
  cache_traj_ = traj;
  return traj;
}

double EventMap::f_gamma(const Vec& slips) const {
  const auto traj = cached_trajectory(slips);
  return adjoint::F_gamma_from_observables(traj->f_levels, traj->f_stages,
                                           setup_.gamma);
}

Vec EventMap::f_gamma_grad(const Vec& slips) const {
  const auto traj = cached_trajectory(slips);
  const auto spec =
      adjoint::ObjectiveSpec::regularized(setup_.gamma, 1.0, setup_.window);
  const auto adj = adjoint::solve_adjoint(*traj, spec);
  return adjoint::contract_bathymetry_sensitivity(adj, setup_.basis, setup_.mesh);
}

Vec EventMap::level_trace(const Vec& slips) const {
  const auto traj = cached_trajectory(slips);
  return traj->f_levels;
}

Vec EventMap::f_grad_at_level(const Vec& slips, int level) const {
  const auto traj = cached_trajectory(slips);
  const auto spec = adjoint::ObjectiveSpec::time_optimal(level, 1.0, setup_.window);
  const auto adj = adjoint::solve_adjoint(*traj, spec);
  return adjoint::contract_bathymetry_sensitivity(adj, setup_.basis, setup_.mesh);
}

double EventMap::f_time_derivative(const Vec& slips, int level) const {
  const auto traj = cached_trajectory(slips);
  return adjoint::time_derivative(*traj, setup_.window, 1.0, level);
}

opt::Problem EventMap::make_problem() const {
  opt::Problem p;
  p.dim = setup_.prior.measure.dim();
  p.preconditioner = setup_.prior.measure.covariance();
  p.rate = [this](const Vec& s) { return source::slip_rate(setup_.prior, s); };
  p.rate_grad = [this](const Vec& s) { return source::slip_rate_grad(setup_.prior, s); };
  p.f_value = [this](const Vec& s) { return f_gamma(s); };
  p.f_grad = [this](const Vec& s) { return f_gamma_grad(s); };
  p.rate_hess_apply = [this](const Vec&, const Vec& v) {
    return setup_.prior.measure.apply_cov_inverse(v);
  };
  p.f_hess_apply = [this](const Vec& theta, const Vec& v) {
    return f_hessian_apply(theta, v);
  };
  return p;
}

opt::TimeProblem EventMap::make_time_problem() const {
  opt::TimeProblem p;
  p.dim = setup_.prior.measure.dim();
  p.preconditioner = setup_.prior.measure.covariance();
  p.rate = [this](const Vec& s) { return source::slip_rate(setup_.prior, s); };
  p.rate_grad = [this](const Vec& s) { return source::slip_rate_grad(setup_.prior, s); };
  p.trace = [this](const Vec& s) { return level_trace(s); };
  p.dt = setup_.dt;
  p.f_grad_at_level = [this](const Vec& s, int level) {
    return f_grad_at_level(s, level);
  };
  p.f_time_derivative = [this](const Vec& s, int level) {
    return f_time_derivative(s, level);
  };
  return p;
}

est::EventOracle EventMap::oracle_regularized() const {
  return [this](const Vec& slips) {
    const swe::Bathymetry b = bathymetry(slips);
    const auto trace = swe::solve_observables(setup_.mesh, b, setup_.t_final,
                                              setup_.dt, setup_.eps, setup_.window);
    return adjoint::F_gamma_from_observables(trace.f_levels, trace.f_stages,
                                             setup_.gamma);
  };
}

est::EventOracle EventMap::oracle_timeopt() const {
  return [this](const Vec& slips) {
    const swe::Bathymetry b = bathymetry(slips);
    const auto trace = swe::solve_observables(setup_.mesh, b, setup_.t_final,
                                              setup_.dt, setup_.eps, setup_.window);
    return trace.f_levels.maxCoeff();
  };
}

Vec EventMap::f_hessian_apply(const Vec& point, const Vec& direction,
                              double base_step) const {
  const double norm = direction.norm();
  if (norm == 0.0) return Vec::Zero(direction.size());
  const Vec unit = direction / norm;
  const double step =
      base_step > 0.0 ? base_step : 1e-4 * (1.0 + point.norm());
  const auto grad = [this](const Vec& s) { return f_gamma_grad(s); };
  return norm * adjoint::hessian_vector_product(grad, point, unit, step);
}

est::HessianApply EventMap::hessian_apply_at(const Vec& point,
                                             double base_step) const {
  Vec p = point;
  return [this, p, base_step](const Vec& direction) {
    return f_hessian_apply(p, direction, base_step);
  };
}

}  // namespace tailprob::tsunami
