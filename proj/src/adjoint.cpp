#include "tailprob/adjoint.hpp"

#include <cmath>

namespace tailprob::adjoint {

using swe::Field;

ObjectiveSpec ObjectiveSpec::regularized(double gamma, double lambda,
                                         swe::ObservationWindow window) {
  if (!(gamma > 0.0)) throw std::invalid_argument("regularized objective needs gamma > 0");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  ObjectiveSpec s;
  s.kind = Kind::Regularized;
  s.gamma = gamma;
  s.lambda = lambda;
  s.window = window;
  return s;
}

ObjectiveSpec ObjectiveSpec::time_optimal(int level, double lambda,
                                          swe::ObservationWindow window) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  ObjectiveSpec s;
  s.kind = Kind::TimeOptimal;
  s.level = level;
  s.lambda = lambda;
  s.window = window;
  return s;
}

namespace {

bool window_matches(const swe::StateTrajectory& traj, const swe::ObservationWindow& w) {
  return traj.recorded_window && traj.recorded_window->c == w.c &&
         traj.recorded_window->d == w.d;
}

Vec dg_sample(const Vec& nodal, int elements) {
  Vec out(2 * elements);
  for (int e = 0; e < elements; ++e) {
    out(2 * e) = nodal(e);
    out(2 * e + 1) = nodal(e + 1);
  }
  return out;
}

}  // namespace

void collect_observables(const swe::StateTrajectory& traj,
                         const swe::ObservationWindow& window, Vec& f_levels,
                         Vec& f_stages) {
  if (window_matches(traj, window)) {
    f_levels = traj.f_levels;
    f_stages = traj.f_stages;
    return;
  }
  const Vec r = swe::window_weights(traj.mesh, window);
  const Vec b0dg = dg_sample(traj.bathy.nodal_ref, traj.mesh.elements);
  const double fb0 = r.dot(b0dg);
  auto fob = [&](const Field& h) { return (r.array() * h).sum() + fb0; };

  f_levels.resize(traj.steps + 1);
  f_stages.resize(traj.steps);
  swe::RhsWorkspace ws;
  Field kh, kv, h1, v1;
  for (int m = 0; m <= traj.steps; ++m) f_levels(m) = fob(traj.h[m]);
  for (int m = 0; m < traj.steps; ++m) {
    swe::semidiscrete_rhs(traj.mesh, traj.bathy, traj.eps, traj.h[m], traj.v[m],
                          kh, kv, ws, traj.time(m));
    h1 = traj.h[m] + traj.dt * kh;
    f_stages(m) = fob(h1);
  }
}

double F_gamma_from_observables(const Vec& f_levels, const Vec& f_stages,
                                double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  const int steps = static_cast<int>(f_stages.size());
  if (f_levels.size() < steps) throw std::invalid_argument("observable sizes differ");
  double fmax = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < steps; ++m)
    fmax = std::max(fmax, std::max(f_levels(m), f_stages(m)));
  const double w = 1.0 / (2.0 * steps);  // dt/(2 T_F)
  double z = 0.0;
  for (int m = 0; m < steps; ++m)
    z += w * (std::exp((f_levels(m) - fmax) / gamma) +
              std::exp((f_stages(m) - fmax) / gamma));
  return fmax + gamma * std::log(z);
}

void F_gamma_weights(const Vec& f_levels, const Vec& f_stages, double gamma,
                     Vec& w_levels, Vec& w_stages) {
  const int steps = static_cast<int>(f_stages.size());
  double fmax = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < steps; ++m)
    fmax = std::max(fmax, std::max(f_levels(m), f_stages(m)));
  w_levels = Vec::Zero(f_levels.size());
  w_stages = Vec::Zero(steps);
  double z = 0.0;
  for (int m = 0; m < steps; ++m) {
    w_levels(m) = std::exp((f_levels(m) - fmax) / gamma);
    w_stages(m) = std::exp((f_stages(m) - fmax) / gamma);
    z += w_levels(m) + w_stages(m);
  }
  w_levels /= z;
  w_stages /= z;
}

double eval_F_gamma(const swe::StateTrajectory& traj,
                    const swe::ObservationWindow& window, double gamma) {
  Vec f_levels, f_stages;
  collect_observables(traj, window, f_levels, f_stages);
  return F_gamma_from_observables(f_levels, f_stages, gamma);
}

TimeOptimum eval_F_timeopt(const swe::StateTrajectory& traj,
                           const swe::ObservationWindow& window) {
  Vec f(traj.steps + 1);
  if (window_matches(traj, window)) {
    f = traj.f_levels;
  } else {
    const Vec r = swe::window_weights(traj.mesh, window);
    const Vec b0dg = dg_sample(traj.bathy.nodal_ref, traj.mesh.elements);
    const double fb0 = r.dot(b0dg);
    for (int m = 0; m <= traj.steps; ++m)
      f(m) = (r.array() * traj.h[m]).sum() + fb0;
  }
  int best = 0;
  for (int m = 1; m <= traj.steps; ++m)
    if (f(m) > f(best)) best = m;  // strict: earliest level wins ties
  return {f(best), best, traj.time(best)};
}

AdjointTrajectory solve_adjoint(const swe::StateTrajectory& traj,
                                const ObjectiveSpec& spec) {
  const auto& mesh = traj.mesh;
  const int n = mesh.dg_size();
  const int M = traj.steps;
  const double dt = traj.dt;

  if (spec.kind == ObjectiveSpec::Kind::TimeOptimal &&
      (spec.level < 0 || spec.level > M))
    throw std::invalid_argument("time-optimal objective: level out of range");

  const Vec r = swe::window_weights(mesh, spec.window);

  // Source weights: lambda * dF/df at every level/stage.
  Vec a_levels = Vec::Zero(M + 1), a_stages = Vec::Zero(M);
  if (spec.kind == ObjectiveSpec::Kind::Regularized) {
    Vec f_levels, f_stages;
    collect_observables(traj, spec.window, f_levels, f_stages);
    Vec wl, wst;
    F_gamma_weights(f_levels, f_stages, spec.gamma, wl, wst);
    a_levels = spec.lambda * wl;
    a_stages = spec.lambda * wst;
  } else {
    a_levels(spec.level) = spec.lambda;
  }

  AdjointTrajectory adj;
  adj.lambda = spec.lambda;
  adj.bx_sensitivity = Vec::Zero(mesh.elements);
  adj.p.assign(M + 1, Field::Zero(n));
  adj.w.assign(M + 1, Field::Zero(n));
  adj.psi.assign(M + 1, Field::Zero(n));

  Field lh = Field::Zero(n), lv = Field::Zero(n);  // adjoint of the current level
  lh += a_levels(M) * r.array();
  adj.p[M] = lh;
  adj.w[M] = lv;

  swe::RhsWorkspace ws;
  Field kh, kv, h1, v1;
  Field th, tv;          // transpose outputs
  Field l1h, l1v;        // adjoint of the middle stage
  Field mu2h, mu2v, mu1h, mu1v;
  Field psi_level;

  auto accumulate_bx = [&](const Field& muv, const Field& h) {
    for (int e = 0; e < mesh.elements; ++e)
      adj.bx_sensitivity(e) += -swe::kGravity *
          (muv(2 * e) * h(2 * e) + muv(2 * e + 1) * h(2 * e + 1));
  };

  for (int m = M - 1; m >= 0; --m) {
    // reconstruct the middle stage from the stored level
    swe::semidiscrete_rhs(mesh, traj.bathy, traj.eps, traj.h[m], traj.v[m], kh,
                          kv, ws, traj.time(m));
    h1 = traj.h[m] + dt * kh;
    v1 = traj.v[m] + dt * kv;

    // u^{m+1} = u^m/2 + (u1 + dt L(u1))/2
    mu2h = 0.5 * dt * lh;
    mu2v = 0.5 * dt * lv;
    accumulate_bx(mu2v, h1);
    swe::rhs_transpose(mesh, traj.bathy, traj.eps, h1, v1, mu2h, mu2v, th, tv,
                       nullptr, ws);
    l1h = 0.5 * lh + th;
    l1v = 0.5 * lv + tv;
    l1h += a_stages(m) * r.array();

    // u1 = u^m + dt L(u^m)
    mu1h = dt * l1h;
    mu1v = dt * l1v;
    accumulate_bx(mu1v, traj.h[m]);
    swe::rhs_transpose(mesh, traj.bathy, traj.eps, traj.h[m], traj.v[m], mu1h,
                       mu1v, th, tv, nullptr, ws, &psi_level);
    lh = 0.5 * lh + l1h + th;
    lv = 0.5 * lv + l1v + tv;
    lh += a_levels(m) * r.array();

    adj.p[m] = lh;
    adj.w[m] = lv;
    adj.psi[m] = psi_level;
  }
  return adj;
}

Vec contract_bathymetry_sensitivity(const AdjointTrajectory& adj,
                                    const source::SlipBasis& basis,
                                    const swe::Mesh& mesh) {
  Vec out(basis.patches());
  const double hbar = mesh.width();
  for (int i = 0; i < basis.patches(); ++i) {
    double s = 0.0;
    for (int e = 0; e < mesh.elements; ++e)
      s += adj.bx_sensitivity(e) *
           (basis.columns(e + 1, i) - basis.columns(e, i)) / hbar;
    out(i) = s;
  }
  return out;
}

Vec assemble_gradient(const swe::StateTrajectory& traj,
                      const AdjointTrajectory& adj,
                      const source::SlipBasis& basis,
                      const source::SlipPrior& prior, const Vec& slips) {
  // J = I - lambda F; bx_sensitivity carries the sensitivity of +lambda F.
  return source::slip_rate_grad(prior, slips) -
         contract_bathymetry_sensitivity(adj, basis, traj.mesh);
}

double time_derivative(const swe::StateTrajectory& traj,
                       const swe::ObservationWindow& window, double lambda,
                       int level) {
  if (level < 0 || level > traj.steps)
    throw std::invalid_argument("time_derivative: level out of range");
  const auto& mesh = traj.mesh;
  const double hbar = mesh.width();
  // interior traces: at c from the element just inside on the right, at d
  // from the element just inside on the left
  auto trace = [&](double x, bool from_right) {
    double t = (x - mesh.a) / hbar;
    int e = static_cast<int>(std::floor(t));
    const bool on_boundary = std::abs(t - std::round(t)) < 1e-9;
    if (on_boundary) e = from_right ? static_cast<int>(std::round(t))
                                    : static_cast<int>(std::round(t)) - 1;
    e = std::max(0, std::min(mesh.elements - 1, e));
    const double xi = (x - mesh.left_node(e)) / hbar;
    return (1.0 - xi) * traj.v[level](2 * e) + xi * traj.v[level](2 * e + 1);
  };
  return lambda * (trace(window.d, false) - trace(window.c, true)) /
         (window.d - window.c);
}

Vec hessian_vector_product(const std::function<Vec(const Vec&)>& grad,
                           const Vec& point, const Vec& direction, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("hvp: step must be positive");
  const Vec gp = grad(point + step * direction);
  const Vec gm = grad(point - step * direction);
  return (gp - gm) / (2.0 * step);
}

}  // namespace tailprob::adjoint
