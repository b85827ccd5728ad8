#pragma once

#include <functional>
#include <vector>

#include "tailprob/source_model.hpp"
#include "tailprob/swe.hpp"

namespace tailprob::adjoint {

/// Which reduced objective the adjoint differentiates. The regularized kind
/// is J = I - lambda * F_gamma (log-integral softening of the running max);
/// the time-optimal kind fixes the observation at one stored time level.
struct ObjectiveSpec {
  enum class Kind { Regularized, TimeOptimal };
  Kind kind;
  double gamma = 0.0;  // regularized only, > 0
  int level = -1;      // time-optimal only: observation level index
  double lambda = 0.0;
  swe::ObservationWindow window;

  static ObjectiveSpec regularized(double gamma, double lambda,
                                   swe::ObservationWindow window);
  static ObjectiveSpec time_optimal(int level, double lambda,
                                    swe::ObservationWindow window);
};

/// Observable trace of a trajectory: f^ob at all levels and RK mid-stages.
/// Uses values recorded during the forward solve when the window matches,
/// otherwise re-runs the stage reconstruction.
void collect_observables(const swe::StateTrajectory& traj,
                         const swe::ObservationWindow& window, Vec& f_levels,
                         Vec& f_stages);

/// gamma log of the time average of exp(f/gamma), with the quadrature
/// induced by SSP-RK2: weight dt/2 on every step's start level and middle
/// stage. Evaluated in log-sum-exp form.
double eval_F_gamma(const swe::StateTrajectory& traj,
                    const swe::ObservationWindow& window, double gamma);

/// Same reduction from raw observable vectors; f_levels[M] is unused.
double F_gamma_from_observables(const Vec& f_levels, const Vec& f_stages,
                                double gamma);

/// Softmax weights d F_gamma / d f at every level and stage.
void F_gamma_weights(const Vec& f_levels, const Vec& f_stages, double gamma,
                     Vec& w_levels, Vec& w_stages);

struct TimeOptimum {
  double value;
  int level;
  double time;
};

/// Maximum of f^ob over stored levels; ties broken by the earliest level.
TimeOptimum eval_F_timeopt(const swe::StateTrajectory& traj,
                           const swe::ObservationWindow& window);

/// Reverse sweep through the stored trajectory: the exact transpose of each
/// SSP-RK2 stage (middle-stage states are reconstructed from the stored
/// levels), with the objective source injected per stage (regularized) or at
/// the chosen level (time-optimal). Fields are the sensitivities of
/// lambda * F with respect to the DG coefficients; bx_sensitivity is the
/// accumulated sensitivity to the per-element bathymetry slope.
struct AdjointTrajectory {
  std::vector<swe::Field> p;    // adjoint of h, per level
  std::vector<swe::Field> w;    // adjoint of v, per level
  std::vector<swe::Field> psi;  // adjoint of phi, per level
  Vec bx_sensitivity;           // per element
  double lambda;
};

AdjointTrajectory solve_adjoint(const swe::StateTrajectory& traj,
                                const ObjectiveSpec& spec);

/// Gradient of J = I - lambda F with respect to the slip coefficients:
/// C_s^{-1} S minus the adjoint bathymetry-slope sensitivity contracted with
/// the basis slopes. Exact gradient of the discretized objective; in this
/// discretization the bathymetry enters only through per-element slopes in a
/// volume term, so no interface corrections arise.
Vec assemble_gradient(const swe::StateTrajectory& traj,
                      const AdjointTrajectory& adj,
                      const source::SlipBasis& basis,
                      const source::SlipPrior& prior, const Vec& slips);

/// The event-map part of the gradient alone: the adjoint bathymetry-slope
/// sensitivity contracted with the slopes of each basis column (sensitivity
/// of lambda * F with respect to the slips).
Vec contract_bathymetry_sensitivity(const AdjointTrajectory& adj,
                                    const source::SlipBasis& basis,
                                    const swe::Mesh& mesh);

/// lambda * (v(d,t) - v(c,t)) / (d - c) from interior traces; equals the
/// time derivative of the time-optimal objective by mass conservation.
double time_derivative(const swe::StateTrajectory& traj,
                       const swe::ObservationWindow& window, double lambda,
                       int level);

/// Central finite difference of a gradient oracle:
/// [grad(S + t d) - grad(S - t d)] / (2 t).
Vec hessian_vector_product(const std::function<Vec(const Vec&)>& grad,
                           const Vec& point, const Vec& direction, double step);

}  // namespace tailprob::adjoint
