#include "tailprob/swe.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tailprob::swe {

namespace {

// 2-point Gauss quadrature on the reference element [0,1].
constexpr double kGaussShift = 0.28867513459481287;  // 1/(2 sqrt 3)
constexpr double kXi1 = 0.5 - kGaussShift;
constexpr double kXi2 = 0.5 + kGaussShift;

inline double sgn0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Mesh::Mesh(double a_, double b_, int elements_) : a(a_), b(b_), elements(elements_) {
  if (!(a < b)) throw ConfigError("mesh: domain endpoints must satisfy a < b");
  if (elements < 2) throw ConfigError("mesh: need at least 2 elements");
}

Bathymetry::Bathymetry(const Mesh& mesh, Vec nodal_, Vec nodal_ref_)
    : nodal(std::move(nodal_)), nodal_ref(std::move(nodal_ref_)) {
  const int n = mesh.elements + 1;
  if (nodal.size() != n || nodal_ref.size() != n)
    throw ConfigError("bathymetry: expected " + std::to_string(n) + " nodal values");
  if (nodal.maxCoeff() >= 0.0 || nodal_ref.maxCoeff() >= 0.0)
    throw ConfigError("bathymetry must be strictly negative over the domain "
                      "(dry states are not supported)");
}

double reference_profile(double x) {
  const double km = x / 1000.0;
  double depth_km;
  if (km <= 45.0)
    depth_km = -0.05;
  else if (km <= 155.0)
    depth_km = -0.05 - 3.95 / 110.0 * (km - 45.0);
  else if (km <= 200.0)
    depth_km = -4.0 - 4.0 / 45.0 * (km - 155.0);
  else if (km <= 300.0)
    depth_km = -8.0 + 4.0 / 100.0 * (km - 200.0);
  else
    depth_km = -4.0;
  return depth_km * 1000.0;
}

Bathymetry make_bathymetry(const Mesh& mesh, const std::function<double(double)>& profile) {
  Vec b(mesh.elements + 1);
  for (int j = 0; j <= mesh.elements; ++j) b(j) = profile(mesh.a + j * mesh.width());
  return Bathymetry(mesh, b, b);
}

Bathymetry load_bathymetry_csv(const std::string& path, const Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bathymetry file: " + path);
  std::vector<double> xs, bs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string xa, ba;
    if (!std::getline(ss, xa, ',') || !std::getline(ss, ba, ','))
      throw ConfigError("bathymetry file: expected two comma-separated columns");
    try {
      xs.push_back(std::stod(xa));
      bs.push_back(std::stod(ba));
    } catch (const std::exception&) {
      if (xs.empty()) continue;  // header row
      throw ConfigError("bathymetry file: non-numeric row: " + line);
    }
  }
  if (xs.size() < 2) throw ConfigError("bathymetry file: need at least two rows");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1]) throw ConfigError("bathymetry file: x must be increasing");
  if (xs.front() > mesh.a || xs.back() < mesh.b)
    throw ConfigError("bathymetry file does not cover the mesh domain");
  Vec b(mesh.elements + 1);
  std::size_t seg = 0;
  for (int j = 0; j <= mesh.elements; ++j) {
    const double x = mesh.a + j * mesh.width();
    while (seg + 2 < xs.size() && xs[seg + 1] < x) ++seg;
    const double t = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
    b(j) = (1.0 - t) * bs[seg] + t * bs[seg + 1];
  }
  return Bathymetry(mesh, b, b);
}

Vec window_weights(const Mesh& mesh, const ObservationWindow& w) {
  if (!(mesh.a < w.c && w.c < w.d && w.d < mesh.b))
    throw ConfigError("observation window must satisfy a < c < d < b");
  Vec r = Vec::Zero(mesh.dg_size());
  const double hbar = mesh.width();
  for (int e = 0; e < mesh.elements; ++e) {
    const double xl = mesh.left_node(e), xr = mesh.right_node(e);
    const double p = std::max(w.c, xl), q = std::min(w.d, xr);
    if (q <= p) continue;
    // integral over [p,q] of the two linear basis functions
    r(2 * e) += ((xr - p) * (xr - p) - (xr - q) * (xr - q)) / (2.0 * hbar);
    r(2 * e + 1) += ((q - xl) * (q - xl) - (p - xl) * (p - xl)) / (2.0 * hbar);
  }
  return r / (w.d - w.c);
}

double lax_friedrichs_constant(const Field& h, const Field& v, double time) {
  double best = -1.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (h(i) < kMinHeight)
      throw PositivityError(static_cast<int>(i / 2), time, h(i));
    const double c = std::abs(v(i) / h(i)) + std::sqrt(kGravity * h(i));
    if (c > best) best = c;
  }
  return best;
}

void RhsWorkspace::resize(int elements) {
  const int n = 2 * elements;
  if (u.size() == n) return;
  u.resize(n);
  phi.resize(n);
  fvn.resize(n);
  uhat_bar.resize(n);
  fvn_bar.resize(n);
  au.resize(n);
  aphi.resize(n);
  fh_if.resize(elements + 1);
  fv_if.resize(elements + 1);
  fh_bar.resize(elements + 1);
  fv_bar.resize(elements + 1);
}

double semidiscrete_rhs(const Mesh& mesh, const Bathymetry& bathy, double eps,
                        const Field& h, const Field& v, Field& dh, Field& dv,
                        RhsWorkspace& ws, double time, int* argmax_node,
                        Field* phi_out) {
  const int K = mesh.elements;
  const int n = 2 * K;
  const double hbar = mesh.width();
  ws.resize(K);
  dh.resize(n);
  dv.resize(n);

  Field& u = ws.u;
  Field& phi = ws.phi;
  Field& fvn = ws.fvn;

  // nodal velocity, LF constant, positivity guard
  double clf = -1.0;
  int cmax = 0;
  for (int i = 0; i < n; ++i) {
    if (h(i) < kMinHeight) throw PositivityError(i / 2, time, h(i));
    u(i) = v(i) / h(i);
    const double c = std::abs(u(i)) + std::sqrt(kGravity * h(i));
    if (c > clf) {
      clf = c;
      cmax = i;
    }
  }
  if (argmax_node) *argmax_node = cmax;

  // phi = (v/h)_x per element, central flux, zero at the reflective walls
  // (mirrored h, negated v gives an odd velocity extension).
  for (int e = 0; e < K; ++e) {
    const int i1 = 2 * e, i2 = 2 * e + 1;
    const double uhat_l = (e == 0) ? 0.0 : 0.5 * (u(i1 - 1) + u(i1));
    const double uhat_r = (e == K - 1) ? 0.0 : 0.5 * (u(i2) + u(i2 + 1));
    const double mid = 0.5 * (u(i1) + u(i2));
    const double raw1 = mid - uhat_l;
    const double raw2 = -mid + uhat_r;
    phi(i1) = (2.0 / hbar) * (2.0 * raw1 - raw2);
    phi(i2) = (2.0 / hbar) * (-raw1 + 2.0 * raw2);
  }
  if (phi_out) *phi_out = phi;

  // momentum flux at the nodes (interface values)
  for (int i = 0; i < n; ++i)
    fvn(i) = v(i) * u(i) + 0.5 * kGravity * h(i) * h(i) - eps * h(i) * phi(i);

  // interface fluxes; ghost states mirror h and negate v, so the mass flux
  // vanishes at the walls and the momentum flux keeps its interior value
  // plus the LF penalty against the reflected velocity.
  Vec& Fh = ws.fh_if;
  Vec& Fv = ws.fv_if;
  Fh(0) = 0.0;
  Fv(0) = fvn(0) - clf * v(0);
  Fh(K) = 0.0;
  Fv(K) = fvn(n - 1) + clf * v(n - 1);
  for (int j = 1; j < K; ++j) {
    const int il = 2 * j - 1, ir = 2 * j;
    Fh(j) = 0.5 * (v(il) + v(ir)) + 0.5 * clf * (h(il) - h(ir));
    Fv(j) = 0.5 * (fvn(il) + fvn(ir)) + 0.5 * clf * (v(il) - v(ir));
  }

  const double minv11 = 4.0 / hbar, minv12 = -2.0 / hbar;
  for (int e = 0; e < K; ++e) {
    const int i1 = 2 * e, i2 = 2 * e + 1;
    // volume fluxes at the two Gauss points from linear interpolants
    double fmv = 0.0;
    for (const double xi : {kXi1, kXi2}) {
      const double al = 1.0 - xi, be = xi;
      const double hg = al * h(i1) + be * h(i2);
      const double vg = al * v(i1) + be * v(i2);
      const double ug = al * u(i1) + be * u(i2);
      const double pg = al * phi(i1) + be * phi(i2);
      fmv += vg * ug + 0.5 * kGravity * hg * hg - eps * hg * pg;
    }
    fmv *= 0.5;
    const double fmh = 0.5 * (v(i1) + v(i2));

    const double bx = bathy.slope(e, hbar);
    const double src1 = -kGravity * bx * (hbar / 6.0) * (2.0 * h(i1) + h(i2));
    const double src2 = -kGravity * bx * (hbar / 6.0) * (h(i1) + 2.0 * h(i2));

    const double rh1 = -fmh + Fh(e);
    const double rh2 = fmh - Fh(e + 1);
    const double rv1 = -fmv + Fv(e) + src1;
    const double rv2 = fmv - Fv(e + 1) + src2;

    dh(i1) = minv11 * rh1 + minv12 * rh2;
    dh(i2) = minv12 * rh1 + minv11 * rh2;
    dv(i1) = minv11 * rv1 + minv12 * rv2;
    dv(i2) = minv12 * rv1 + minv11 * rv2;
  }
  return clf;
}

void rhs_transpose(const Mesh& mesh, const Bathymetry& bathy, double eps,
                   const Field& h, const Field& v, const Field& wh,
                   const Field& wv, Field& ah, Field& av, Vec* dbx,
                   RhsWorkspace& ws, Field* psi_out) {
  const int K = mesh.elements;
  const int n = 2 * K;
  const double hbar = mesh.width();
  ws.resize(K);
  ah.resize(n);
  av.resize(n);
  ah.setZero();
  av.setZero();

  Field& u = ws.u;
  Field& phi = ws.phi;
  Field& fvn = ws.fvn;

  // Recompute the forward intermediates at this state.
  double clf = -1.0;
  int cmax = 0;
  for (int i = 0; i < n; ++i) {
    if (h(i) < kMinHeight) throw PositivityError(i / 2, 0.0, h(i));
    u(i) = v(i) / h(i);
    const double c = std::abs(u(i)) + std::sqrt(kGravity * h(i));
    if (c > clf) {
      clf = c;
      cmax = i;
    }
  }
  for (int e = 0; e < K; ++e) {
    const int i1 = 2 * e, i2 = 2 * e + 1;
    const double uhat_l = (e == 0) ? 0.0 : 0.5 * (u(i1 - 1) + u(i1));
    const double uhat_r = (e == K - 1) ? 0.0 : 0.5 * (u(i2) + u(i2 + 1));
    const double mid = 0.5 * (u(i1) + u(i2));
    const double raw1 = mid - uhat_l;
    const double raw2 = -mid + uhat_r;
    phi(i1) = (2.0 / hbar) * (2.0 * raw1 - raw2);
    phi(i2) = (2.0 / hbar) * (-raw1 + 2.0 * raw2);
  }
  for (int i = 0; i < n; ++i)
    fvn(i) = v(i) * u(i) + 0.5 * kGravity * h(i) * h(i) - eps * h(i) * phi(i);

  // Bathymetry-slope sensitivity: rhs depends on bx only through the source,
  // and M^{-1} cancels against the mass matrix in it.
  if (dbx) {
    for (int e = 0; e < K; ++e)
      (*dbx)(e) += -kGravity * (wv(2 * e) * h(2 * e) + wv(2 * e + 1) * h(2 * e + 1));
  }

  Field& au = ws.au;
  Field& aphi = ws.aphi;
  Field& fvn_bar = ws.fvn_bar;
  Field& uhat_bar = ws.uhat_bar;  // indexed by interface via element slots
  au.setZero();
  aphi.setZero();
  fvn_bar.setZero();
  Vec& Fh_bar = ws.fh_bar;
  Vec& Fv_bar = ws.fv_bar;
  Fh_bar.setZero();
  Fv_bar.setZero();
  double clf_bar = 0.0;

  const double minv11 = 4.0 / hbar, minv12 = -2.0 / hbar;
  for (int e = 0; e < K; ++e) {
    const int i1 = 2 * e, i2 = 2 * e + 1;
    // through M^{-1} (symmetric)
    const double rh1b = minv11 * wh(i1) + minv12 * wh(i2);
    const double rh2b = minv12 * wh(i1) + minv11 * wh(i2);
    const double rv1b = minv11 * wv(i1) + minv12 * wv(i2);
    const double rv2b = minv12 * wv(i1) + minv11 * wv(i2);

    // source term (M applied to h within the element)
    const double bx = bathy.slope(e, hbar);
    const double gb = -kGravity * bx * (hbar / 6.0);
    ah(i1) += gb * (2.0 * rv1b + rv2b);
    ah(i2) += gb * (rv1b + 2.0 * rv2b);

    // volume means and interface flux weights
    const double fmh_bar = -rh1b + rh2b;
    const double fmv_bar = -rv1b + rv2b;
    Fh_bar(e) += rh1b;
    Fh_bar(e + 1) += -rh2b;
    Fv_bar(e) += rv1b;
    Fv_bar(e + 1) += -rv2b;

    // h-equation volume flux 0.5 (v(i1)+v(i2))
    av(i1) += 0.5 * fmh_bar;
    av(i2) += 0.5 * fmh_bar;

    // v-equation Gauss-point fluxes
    for (const double xi : {kXi1, kXi2}) {
      const double al = 1.0 - xi, be = xi;
      const double hg = al * h(i1) + be * h(i2);
      const double vg = al * v(i1) + be * v(i2);
      const double ug = al * u(i1) + be * u(i2);
      const double pg = al * phi(i1) + be * phi(i2);
      const double fg_bar = 0.5 * fmv_bar;
      const double hg_bar = (kGravity * hg - eps * pg) * fg_bar;
      const double vg_bar = ug * fg_bar;
      const double ug_bar = vg * fg_bar;
      const double pg_bar = -eps * hg * fg_bar;
      ah(i1) += al * hg_bar;
      ah(i2) += be * hg_bar;
      av(i1) += al * vg_bar;
      av(i2) += be * vg_bar;
      au(i1) += al * ug_bar;
      au(i2) += be * ug_bar;
      aphi(i1) += al * pg_bar;
      aphi(i2) += be * pg_bar;
    }
  }

  // interface fluxes
  {
    // left wall: Fv(0) = fvn(0) - clf v(0)
    fvn_bar(0) += Fv_bar(0);
    av(0) += -clf * Fv_bar(0);
    clf_bar += -v(0) * Fv_bar(0);
    // right wall: Fv(K) = fvn(n-1) + clf v(n-1)
    fvn_bar(n - 1) += Fv_bar(K);
    av(n - 1) += clf * Fv_bar(K);
    clf_bar += v(n - 1) * Fv_bar(K);
  }
  for (int j = 1; j < K; ++j) {
    const int il = 2 * j - 1, ir = 2 * j;
    const double fhb = Fh_bar(j), fvb = Fv_bar(j);
    av(il) += 0.5 * fhb;
    av(ir) += 0.5 * fhb;
    ah(il) += 0.5 * clf * fhb;
    ah(ir) += -0.5 * clf * fhb;
    clf_bar += 0.5 * (h(il) - h(ir)) * fhb;
    fvn_bar(il) += 0.5 * fvb;
    fvn_bar(ir) += 0.5 * fvb;
    av(il) += 0.5 * clf * fvb;
    av(ir) += -0.5 * clf * fvb;
    clf_bar += 0.5 * (v(il) - v(ir)) * fvb;
  }

  // nodal momentum flux fvn = v u + g h^2/2 - eps h phi
  for (int i = 0; i < n; ++i) {
    const double fb = fvn_bar(i);
    if (fb == 0.0) continue;
    av(i) += u(i) * fb;
    au(i) += v(i) * fb;
    ah(i) += (kGravity * h(i) - eps * phi(i)) * fb;
    aphi(i) += -eps * h(i) * fb;
  }

  // LF constant: subgradient at the recorded argmax node
  if (clf_bar != 0.0) {
    const double s = sgn0(u(cmax));
    ah(cmax) += clf_bar * (-s * u(cmax) / h(cmax) +
                           0.5 * std::sqrt(kGravity / h(cmax)));
    av(cmax) += clf_bar * (s / h(cmax));
  }

  if (psi_out) *psi_out = aphi;

  // phi elimination: phi = M^{-1} raw(u)
  uhat_bar.setZero();  // slot i = interface adjoint; use 0..K via element index
  for (int e = 0; e < K; ++e) {
    const int i1 = 2 * e, i2 = 2 * e + 1;
    const double pb1 = minv11 * aphi(i1) + minv12 * aphi(i2);
    const double pb2 = minv12 * aphi(i1) + minv11 * aphi(i2);
    // raw1 = mid - uhat_l, raw2 = -mid + uhat_r, mid = (u(i1)+u(i2))/2
    const double mid_bar = pb1 - pb2;
    au(i1) += 0.5 * mid_bar;
    au(i2) += 0.5 * mid_bar;
    if (e > 0) {
      // uhat_l = (u(i1-1)+u(i1))/2, weight -pb1
      au(i1 - 1) += -0.5 * pb1;
      au(i1) += -0.5 * pb1;
    }
    if (e < K - 1) {
      // uhat_r = (u(i2)+u(i2+1))/2, weight +pb2
      au(i2) += 0.5 * pb2;
      au(i2 + 1) += 0.5 * pb2;
    }
  }

  // u = v / h
  for (int i = 0; i < n; ++i) {
    av(i) += au(i) / h(i);
    ah(i) += -u(i) / h(i) * au(i);
  }
}

namespace {

// phi alone (no fluxes); used when storing trajectory levels.
void compute_phi(const Mesh& mesh, const Field& h, const Field& v, Field& phi) {
  const int K = mesh.elements;
  const double hbar = mesh.width();
  phi.resize(2 * K);
  auto uat = [&](int i) { return v(i) / h(i); };
  for (int e = 0; e < K; ++e) {
    const int i1 = 2 * e, i2 = 2 * e + 1;
    const double uhat_l = (e == 0) ? 0.0 : 0.5 * (uat(i1 - 1) + uat(i1));
    const double uhat_r = (e == K - 1) ? 0.0 : 0.5 * (uat(i2) + uat(i2 + 1));
    const double mid = 0.5 * (uat(i1) + uat(i2));
    const double raw1 = mid - uhat_l;
    const double raw2 = -mid + uhat_r;
    phi(i1) = (2.0 / hbar) * (2.0 * raw1 - raw2);
    phi(i2) = (2.0 / hbar) * (-raw1 + 2.0 * raw2);
  }
}

}  // namespace

double StateTrajectory::mass(int level) const {
  const double hbar = mesh.width();
  double m = 0.0;
  for (int e = 0; e < mesh.elements; ++e)
    m += 0.5 * hbar * (h[level](2 * e) + h[level](2 * e + 1));
  return m;
}

namespace {

struct Stepper {
  const Mesh& mesh;
  const Bathymetry& bathy;
  double eps;
  double dt;
  double clf0;
  RhsWorkspace ws;
  Field k_h, k_v, h1, v1, k2_h, k2_v;

  void check_clf(double clf, double t) {
    if (clf > 2.0 * clf0)
      throw SolverError("wave speed exceeded twice its initial estimate (" +
                        std::to_string(clf) + " vs " + std::to_string(clf0) +
                        ") at t=" + std::to_string(t) +
                        "; the uniform time step is no longer stable");
  }

  // One SSP-RK2 step in place; exposes the middle-stage state via h1,v1.
  void step(Field& h, Field& v, double t) {
    double clf = semidiscrete_rhs(mesh, bathy, eps, h, v, k_h, k_v, ws, t);
    check_clf(clf, t);
    h1 = h + dt * k_h;
    v1 = v + dt * k_v;
    clf = semidiscrete_rhs(mesh, bathy, eps, h1, v1, k2_h, k2_v, ws, t + dt);
    check_clf(clf, t + dt);
    h = 0.5 * h + 0.5 * (h1 + dt * k2_h);
    v = 0.5 * v + 0.5 * (v1 + dt * k2_v);
  }
};

int step_count(double t_final, double& dt) {
  if (!(t_final > 0.0) || !(dt > 0.0))
    throw ConfigError("final time and time step must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil(t_final / dt - 1e-9)));
  dt = t_final / steps;
  return steps;
}

void check_cfl_a_priori(const Mesh& mesh, const Bathymetry& bathy, double dt) {
  const double bound = mesh.width() / initial_lf_constant(mesh, bathy);
  if (dt > 0.95 * bound)
    throw ConfigError("time step " + std::to_string(dt) +
                      " violates the CFL bound " + std::to_string(bound));
}

}  // namespace

double initial_lf_constant(const Mesh& mesh, const Bathymetry& bathy) {
  Field h0(mesh.dg_size());
  for (int e = 0; e < mesh.elements; ++e) {
    h0(2 * e) = -bathy.nodal_ref(e);
    h0(2 * e + 1) = -bathy.nodal_ref(e + 1);
  }
  Field v0 = Field::Zero(mesh.dg_size());
  return lax_friedrichs_constant(h0, v0);
}

double cfl_timestep(const Mesh& mesh, const Bathymetry& bathy, double cfl) {
  if (!(cfl > 0.0) || cfl > 0.95)
    throw ConfigError("cfl must lie in (0, 0.95]");
  return cfl * mesh.width() / initial_lf_constant(mesh, bathy);
}

StateTrajectory solve_forward(const Mesh& mesh, const Bathymetry& bathy,
                              double t_final, double dt, double eps,
                              const ObservationWindow* record) {
  const int steps = step_count(t_final, dt);
  check_cfl_a_priori(mesh, bathy, dt);

  StateTrajectory traj{mesh, bathy, eps, dt, steps, {}, {}, {}};
  traj.h.reserve(steps + 1);
  traj.v.reserve(steps + 1);
  traj.phi.reserve(steps + 1);

  Field h(mesh.dg_size()), v = Field::Zero(mesh.dg_size());
  for (int e = 0; e < mesh.elements; ++e) {
    h(2 * e) = -bathy.nodal_ref(e);
    h(2 * e + 1) = -bathy.nodal_ref(e + 1);
  }

  Vec r;
  double fb0 = 0.0;
  if (record) {
    traj.recorded_window = *record;
    traj.f_levels.resize(steps + 1);
    traj.f_stages.resize(steps);
    r = window_weights(mesh, *record);
    for (int e = 0; e < mesh.elements; ++e)
      fb0 += r(2 * e) * bathy.nodal_ref(e) + r(2 * e + 1) * bathy.nodal_ref(e + 1);
  }
  auto fob = [&](const Field& hh) { return (r.array() * hh).sum() + fb0; };

  Stepper st{mesh, bathy, eps, dt, initial_lf_constant(mesh, bathy), {}, {}, {}, {}, {}, {}, {}};

  Field phi_store;
  auto store_level = [&](const Field& hh, const Field& vv) {
    compute_phi(mesh, hh, vv, phi_store);
    traj.h.push_back(hh);
    traj.v.push_back(vv);
    traj.phi.push_back(phi_store);
  };

  store_level(h, v);
  if (record) traj.f_levels(0) = fob(h);
  for (int m = 0; m < steps; ++m) {
    st.step(h, v, m * dt);
    if (record) {
      traj.f_stages(m) = fob(st.h1);
      traj.f_levels(m + 1) = fob(h);
    }
    store_level(h, v);
  }
  return traj;
}

ObservableTrace solve_observables(const Mesh& mesh, const Bathymetry& bathy,
                                  double t_final, double dt, double eps,
                                  const ObservationWindow& window) {
  const int steps = step_count(t_final, dt);
  check_cfl_a_priori(mesh, bathy, dt);

  Field h(mesh.dg_size()), v = Field::Zero(mesh.dg_size());
  for (int e = 0; e < mesh.elements; ++e) {
    h(2 * e) = -bathy.nodal_ref(e);
    h(2 * e + 1) = -bathy.nodal_ref(e + 1);
  }
  const Vec r = window_weights(mesh, window);
  double fb0 = 0.0;
  for (int e = 0; e < mesh.elements; ++e)
    fb0 += r(2 * e) * bathy.nodal_ref(e) + r(2 * e + 1) * bathy.nodal_ref(e + 1);
  auto fob = [&](const Field& hh) { return (r.array() * hh).sum() + fb0; };

  ObservableTrace trace;
  trace.dt = dt;
  trace.steps = steps;
  trace.f_levels.resize(steps + 1);
  trace.f_stages.resize(steps);

  Stepper st{mesh, bathy, eps, dt, initial_lf_constant(mesh, bathy), {}, {}, {}, {}, {}, {}, {}};
  trace.f_levels(0) = fob(h);
  for (int m = 0; m < steps; ++m) {
    st.step(h, v, m * dt);
    trace.f_stages(m) = fob(st.h1);
    trace.f_levels(m + 1) = fob(h);
  }
  return trace;
}

double observe(const StateTrajectory& traj, const ObservationWindow& w, int level) {
  if (level < 0 || level > traj.steps)
    throw std::invalid_argument("observe: level out of range");
  const Vec r = window_weights(traj.mesh, w);
  double f = 0.0;
  for (int e = 0; e < traj.mesh.elements; ++e)
    f += r(2 * e) * (traj.h[level](2 * e) + traj.bathy.nodal_ref(e)) +
         r(2 * e + 1) * (traj.h[level](2 * e + 1) + traj.bathy.nodal_ref(e + 1));
  return f;
}

void export_trajectory_csv(const StateTrajectory& traj, const std::string& path,
                           int level_stride) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << "t,x,h,v\n";
  char buf[160];
  for (int m = 0; m <= traj.steps; m += level_stride) {
    for (int i = 0; i < traj.mesh.dg_size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g,%.17g\n", traj.time(m),
                    traj.mesh.dg_x(i), traj.h[m](i), traj.v[m](i));
      out << buf;
    }
  }
}

}  // namespace tailprob::swe
