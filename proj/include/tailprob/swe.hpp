#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tailprob/util.hpp"

namespace tailprob::swe {

inline constexpr double kGravity = 9.81;  // m/s^2
inline constexpr double kMinHeight = 1e-3;  // m; below this the solver errors out

using Field = Eigen::ArrayXd;  // DG nodal coefficients, 2 per element

/// Uniform 1D mesh on [a,b] with linear DG elements (2 nodes each).
struct Mesh {
  Mesh(double a, double b, int elements);
  double a;
  double b;
  int elements;
  double width() const { return (b - a) / elements; }
  int dg_size() const { return 2 * elements; }
  double left_node(int e) const { return a + e * width(); }
  double right_node(int e) const { return a + (e + 1) * width(); }
  /// x-coordinate of DG node i (i = 2e left, 2e+1 right of element e).
  double dg_x(int i) const { return (i % 2 == 0) ? left_node(i / 2) : right_node(i / 2); }
};

/// Continuous piecewise-linear bathymetry (K+1 nodal values, meters,
/// negative below sea level) together with the reference profile B0.
struct Bathymetry {
  Bathymetry(const Mesh& mesh, Vec nodal, Vec nodal_ref);
  Vec nodal;      // B
  Vec nodal_ref;  // B0
  double slope(int e, double width) const { return (nodal(e + 1) - nodal(e)) / width; }
};

/// Reference profile of the built-in shelf/trench slice: -50 m shelf near
/// shore, descent to a -8 km trench at 200 km, rise to -4 km abyssal plain.
double reference_profile(double x);

Bathymetry make_bathymetry(const Mesh& mesh, const std::function<double(double)>& profile);
Bathymetry load_bathymetry_csv(const std::string& path, const Mesh& mesh);

struct ObservationWindow {
  double c;
  double d;
};

/// Quadrature weights r with r.h = (1/(d-c)) * integral_c^d h dx, exact for
/// piecewise-linear h; partially covered elements are split at c and d.
Vec window_weights(const Mesh& mesh, const ObservationWindow& w);

/// max over nodes of |v/h| + sqrt(g h). `time` only labels errors.
double lax_friedrichs_constant(const Field& h, const Field& v, double time = 0.0);

/// Global Lax-Friedrichs flux (f(q-)+f(q+))/2 + (C/2) n- (q- - q+).
inline double numerical_flux(double qm, double qp, double fqm, double fqp,
                             double clf, double nm) {
  return 0.5 * (fqm + fqp) + 0.5 * clf * nm * (qm - qp);
}

struct RhsWorkspace {
  Field u, phi, fvn, uhat_bar, fvn_bar, au, aphi;
  Vec fh_if, fv_if, fh_bar, fv_bar;
  void resize(int elements);
};

/// Semidiscrete DG right-hand side of the viscous system: d/dt (h,v).
/// phi is eliminated per call (central flux); the momentum volume flux
/// v*u + g h^2/2 - eps*h*phi is integrated with 2-point Gauss quadrature,
/// which cancels the -g h B_x source exactly for h = -B (lake at rest).
/// Returns the global LF constant used; argmax_node receives the node
/// realizing it.
double semidiscrete_rhs(const Mesh& mesh, const Bathymetry& bathy, double eps,
                        const Field& h, const Field& v, Field& dh, Field& dv,
                        RhsWorkspace& ws, double time = 0.0,
                        int* argmax_node = nullptr, Field* phi_out = nullptr);

/// Exact transpose of semidiscrete_rhs at state (h,v): given weights
/// (wh,wv) on the output, accumulates (ah,av) += (d rhs/d(h,v))^T (wh,wv),
/// including the dependence of the global LF constant on the state, and adds
/// the per-element sensitivity to the bathymetry slope into dbx:
/// dbx[e] += -g * sum_nodes wv*h. psi_out receives the adjoint of phi.
void rhs_transpose(const Mesh& mesh, const Bathymetry& bathy, double eps,
                   const Field& h, const Field& v, const Field& wh,
                   const Field& wv, Field& ah, Field& av, Vec* dbx,
                   RhsWorkspace& ws, Field* psi_out = nullptr);

/// One SSP-RK2 (Heun) step u <- u/2 + (u1 + dt L(u1))/2 with u1 = u + dt L(u).
/// State needs +, scalar *; used directly by tests and by the solver loop.
template <typename State, typename Rhs>
State ssp_rk2_step(const State& y, double dt, Rhs&& rhs) {
  State u1 = y + dt * rhs(y);
  return 0.5 * y + 0.5 * (u1 + dt * rhs(u1));
}

/// All time levels of one forward solve. Levels are retained because the
/// adjoint integrates backwards through the same states; memory is
/// steps * elements * 6 doubles.
struct StateTrajectory {
  Mesh mesh;
  Bathymetry bathy;
  double eps;
  double dt;
  int steps;  // M; levels 0..M stored
  std::vector<Field> h, v, phi;
  double time(int level) const { return level * dt; }
  double mass(int level) const;

  // Observable recording (when a window was passed to solve_forward):
  // f^ob at every level and at every step's middle RK stage. The stage
  // values are what the SSP-RK2-induced time quadrature integrates.
  std::optional<ObservationWindow> recorded_window;
  Vec f_levels;  // size M+1
  Vec f_stages;  // size M
};

/// Initial condition h = -B0, v = 0. Throws ConfigError when dt violates
/// the CFL bound a priori, SolverError when the LF constant mid-run exceeds
/// twice its initial value, PositivityError when h drops below kMinHeight.
StateTrajectory solve_forward(const Mesh& mesh, const Bathymetry& bathy,
                              double t_final, double dt, double eps,
                              const ObservationWindow* record = nullptr);

/// Same stepping, but keeps only the observable trace (constant memory);
/// the sampling estimators drive thousands of these.
struct ObservableTrace {
  double dt;
  int steps;
  Vec f_levels;
  Vec f_stages;
};
ObservableTrace solve_observables(const Mesh& mesh, const Bathymetry& bathy,
                                  double t_final, double dt, double eps,
                                  const ObservationWindow& window);

/// Average of h + B0 over [c,d] at a stored level, exact for linear DG.
double observe(const StateTrajectory& traj, const ObservationWindow& w, int level);

double initial_lf_constant(const Mesh& mesh, const Bathymetry& bathy);
/// dt = cfl * width / C^LF(t=0); held uniform for the whole run.
double cfl_timestep(const Mesh& mesh, const Bathymetry& bathy, double cfl);

void export_trajectory_csv(const StateTrajectory& traj, const std::string& path,
                           int level_stride = 1);

}  // namespace tailprob::swe
