// Acceptance suite. Each --criterion N invocation runs one criterion,
// prints indented evidence lines and a final "criterion N: PASS|FAIL" line,
// and the process exits nonzero if any requested criterion failed.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "../support/oracles.hpp"
#include "tailprob/adjoint.hpp"
#include "tailprob/estimators.hpp"
#include "tailprob/ldt_opt.hpp"
#include "tailprob/numerics.hpp"
#include "tailprob/tsunami.hpp"

using namespace tailprob;

namespace {

struct Criterion {
  explicit Criterion(int n) : n(n), t0(std::chrono::steady_clock::now()) {}
  int n;
  bool ok = true;
  std::chrono::steady_clock::time_point t0;

  void check(bool cond, const std::string& what) {
    std::printf("  [%s] %s\n", cond ? "ok" : "FAIL", what.c_str());
    ok = ok && cond;
  }
  int finish() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s (%.1f s)\n", n, ok ? "PASS" : "FAIL", secs);
    std::fflush(stdout);
    return ok ? 0 : 1;
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// Tsunami studies

// Calibrated acceptance configuration: wide surrogate patches, rescaled so
// lambda = 12..48 spans event probabilities from ~5e-3 down past 1e-20.
tsunami::Setup tsunami_setup(int elements, double t_final, double width_factor,
                             double peak) {
  swe::Mesh mesh(0.0, 400e3, elements);
  swe::Bathymetry reference = swe::make_bathymetry(mesh, swe::reference_profile);
  source::SurrogateParams params;
  params.segment_start = 178e3;
  params.segment_end = 187e3;
  params.patches = 20;
  params.width_factor = width_factor;
  params.peak = peak;
  source::SlipBasis basis = source::analytic_surrogate_basis(mesh, params);
  source::SlipPrior prior(20, 10.0);
  const double dt = swe::cfl_timestep(mesh, reference, 0.3);
  return tsunami::Setup{std::move(mesh),  std::move(reference),
                        std::move(basis), std::move(prior),
                        swe::ObservationWindow{40e3, 44e3},
                        t_final,          dt,
                        1.0 * (400e3 / elements),  // c_visc = 1
                        0.003};
}

tsunami::Setup acceptance_study(int elements = 400, double t_final = 3000.0) {
  return tsunami_setup(elements, t_final, 8.0, 0.045);
}

// Best-Hamiltonian multi-start (the flat reference start sits in a shallow
// local basin of the softened objective).
opt::OptimumRecord minimize_best(const opt::Problem& problem, double lambda,
                                 const std::vector<Vec>& starts,
                                 const opt::Tolerances& tol = {}) {
  opt::OptimumRecord best;
  bool have = false;
  for (const Vec& s : starts) {
    opt::OptimumRecord rec;
    try {
      rec = opt::minimize_hamiltonian(problem, lambda, s, tol);
    } catch (const std::exception& e) {
      continue;
    }
    const double h = rec.rate - lambda * rec.z;
    const double hb = best.rate - lambda * best.z;
    if (!have || (rec.converged && (!best.converged || h < hb))) {
      best = rec;
      have = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// criterion 1: discrete-adjoint exactness on the coarse study

int criterion1() {
  Criterion c(1);
  auto setup = tsunami_setup(64, 1500.0, 30.0, 0.25);
  const tsunami::EventMap event(setup);
  const double lambda = 12.0;
  const Vec base = 0.5 * measures::sample(setup.prior.measure, 42, 1).front();
  const double scale = std::max(base.norm(), 1.0);

  // fixed observation level for the time-optimal objective
  const Vec trace = event.level_trace(base);
  int level = 0;
  for (Eigen::Index m = 1; m < trace.size(); ++m)
    if (trace(m) > trace(level)) level = static_cast<int>(m);

  for (const bool timeopt : {false, true}) {
    auto j_value = [&](const Vec& s) {
      const double f = timeopt ? event.level_trace(s)(level) : event.f_gamma(s);
      return source::slip_rate(setup.prior, s) - lambda * f;
    };
    const Vec grad =
        source::slip_rate_grad(setup.prior, base) -
        lambda * (timeopt ? event.f_grad_at_level(base, level)
                          : event.f_gamma_grad(base));
    std::mt19937_64 rng(timeopt ? 18 : 17);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int d = 0; d < 10; ++d) {
      Vec dir(base.size());
      for (Eigen::Index i = 0; i < base.size(); ++i) dir(i) = normal(rng);
      dir.normalize();
      const double exact = grad.dot(dir);
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= 4; ++k) {
        const double step = 1e-3 * scale * std::pow(10.0, -k);
        const double fd = oracles::directional_fd(j_value, base, dir, step);
        best = std::min(best,
                        std::abs(fd - exact) / std::max(std::abs(exact), 1e-300));
      }
      worst = std::max(worst, best);
    }
    c.check(worst <= 1e-6,
            fmt("%s objective: worst min-over-steps relative error %.3g <= 1e-6",
                timeopt ? "time-optimal" : "softened", worst));
  }
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 2: lake at rest over the full default horizon

int criterion2() {
  Criterion c(2);
  swe::Mesh mesh(0.0, 400e3, 400);
  const swe::Bathymetry bathy = swe::make_bathymetry(mesh, swe::reference_profile);
  const double dt = swe::cfl_timestep(mesh, bathy, 0.3);
  const auto traj = swe::solve_forward(mesh, bathy, 4000.0, dt, mesh.width());
  double worst = 0.0;
  for (int m = 0; m <= traj.steps; ++m)
    for (int e = 0; e < mesh.elements; ++e) {
      worst = std::max(worst, std::abs(traj.h[m](2 * e) + bathy.nodal_ref(e)));
      worst = std::max(worst,
                       std::abs(traj.h[m](2 * e + 1) + bathy.nodal_ref(e + 1)));
    }
  const double drift = std::abs(traj.mass(traj.steps) - traj.mass(0)) / traj.mass(0);
  c.check(worst <= 1e-8, fmt("sup |h + B0| over all levels %.3g <= 1e-8 m", worst));
  c.check(drift <= 1e-8, fmt("relative mass drift %.3g <= 1e-8", drift));
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 3: estimator oracle on the planar toy F = x + 0.1 y^2

int criterion3() {
  Criterion c(3);
  const double curv = 0.1;
  const auto m = measures::GaussianMeasure(Vec::Zero(2), Mat::Identity(2, 2));
  const est::EventOracle oracle = [curv](const Vec& t) {
    return t(0) + curv * t(1) * t(1);
  };
  auto truth = [curv](double z) { return oracles::curved_toy_tail(z, curv); };

  // (a) plain Monte Carlo coverage down to p ~ 1e-4
  {
    const std::vector<double> zs{1.0, 2.0, 3.0, 3.5};
    const auto curve = est::mc_curve(oracle, m, zs, 1000000, 20260104);
    bool all = true;
    for (const auto& e : curve) {
      const double t = truth(e.z);
      if (t < 1e-4) continue;
      all = all && e.ci_low <= t && t <= e.ci_high;
    }
    c.check(all, "(a) MC (N=1e6) confidence intervals cover truth for p >= 1e-4");
  }

  // (b) importance sampling down to p ~ 1e-12; optimizers are on-axis for
  // z < 5 and bifurcate to (5, +-sqrt(10 z - 50)) beyond
  {
    auto record_for = [&](double z) {
      opt::OptimumRecord rec;
      rec.converged = true;
      rec.z = z;
      if (z < 5.0) {
        rec.theta_star = (Vec(2) << z, 0.0).finished();
        rec.rate = 0.5 * z * z;
        rec.lambda = z;
      } else {
        const double y = std::sqrt(10.0 * z - 50.0);
        rec.theta_star = (Vec(2) << 5.0, y).finished();
        rec.rate = 5.0 * z - 12.5;
        rec.lambda = 5.0;
      }
      return rec;
    };
    // thresholds with truth from ~1e-2 down to ~1e-12
    const std::vector<double> zs{2.6, 3.7, 4.6, 5.8, 6.9, 8.0};
    bool all = true;
    int covered_single_mode = 0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double z = zs[i];
      const double t = truth(z);
      const auto e = est::is_estimate(oracle, m, record_for(z), z, 100,
                                      900 + static_cast<long>(i));
      const bool covers = e.ci_low <= t && t <= e.ci_high;
      std::printf("      z=%.2f p=%.3g IS=[%.3g, %.3g] %s\n", z, t, e.ci_low,
                  e.ci_high, covers ? "covered" : "missed");
      if (z < 5.0 && covers) ++covered_single_mode;
      all = all && covers;
    }
    c.check(covered_single_mode == 3,
            "(b) IS (N=100/optimizer) covers truth while the optimizer is unique");
    c.check(all,
            "(b) IS coverage down to p ~ 1e-12 (fails beyond z = 5: optimizers "
            "bifurcate, a single mean shift sees half the mass)");
  }

  // (c) second-order set approximation for I* >= 10 (z in [4.47, 5))
  {
    bool all = true;
    for (double i_star : {10.0, 11.0, 12.0}) {
      const double z = std::sqrt(2.0 * i_star);
      opt::OptimumRecord rec;
      rec.theta_star = (Vec(2) << z, 0.0).finished();
      rec.rate = i_star;
      rec.z = z;
      rec.lambda = z;
      Mat hess = Mat::Zero(2, 2);
      hess(1, 1) = 2.0 * curv;
      const auto [e, spec] = est::sorm_estimate_dense(rec, m, hess);
      const double ratio = e.p / truth(z);
      std::printf("      I*=%.0f ratio P_SORM/P_truth = %.3f\n", i_star, ratio);
      all = all && ratio >= 0.9 && ratio <= 1.1;
    }
    c.check(all,
            "(c) P_SORM/P_truth in [0.9, 1.1] for I* >= 10 (the positivity "
            "margin 1 - 0.2 z vanishes at z = 5 on this toy)");
  }

  // (d) half-space form: exact below truth, asymptotic bound tightening
  {
    bool below = true;
    for (double i_star : {2.0, 4.5, 8.0, 12.5}) {
      opt::OptimumRecord rec;
      rec.rate = i_star;
      rec.z = std::sqrt(2.0 * i_star);
      rec.theta_star = (Vec(2) << rec.z, 0.0).finished();
      const auto e = est::form_estimate(rec);
      const double beta = std::sqrt(2.0 * i_star);
      const double half_space = oracles::adaptive_simpson(
          [&](double s) { return oracles::std_normal_pdf(s + beta); }, 0.0, 40.0,
          1e-13);
      below = below && e.p <= half_space * (1.0 + 1e-10);
    }
    c.check(below, "(d) exact half-space form never exceeds its quadrature");
    opt::OptimumRecord rec;
    rec.rate = 12.5;
    rec.z = 5.0;
    rec.theta_star = (Vec(2) << 5.0, 0.0).finished();
    const auto e = est::form_estimate(rec);
    const double ratio = e.asymptotic_bound / e.p;
    c.check(ratio >= 1.0 && ratio <= 1.05,
            fmt("(d) two-form ratio at I* = 12.5 is %.4f (in [1, 1.05])", ratio));
    double prev = std::numeric_limits<double>::infinity();
    bool tightening = true;
    for (double i_star = 4.0; i_star <= 40.0; i_star += 4.0) {
      opt::OptimumRecord r2;
      r2.rate = i_star;
      const auto e2 = est::form_estimate(r2);
      const double r = e2.asymptotic_bound / e2.p;
      tightening = tightening && r <= prev;
      prev = r;
    }
    c.check(tightening && prev < 1.02, "(d) two-form ratio decreases toward one");
  }
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 4: paraboloid-measure quadrature check in n = 2 and n = 3

int criterion4() {
  Criterion c(4);
  const auto run2 = [&](double beta, double h) {
    opt::OptimumRecord rec;
    rec.theta_star = (Vec(2) << beta, 0.0).finished();
    rec.rate = 0.5 * beta * beta;
    rec.z = beta;
    rec.lambda = beta;
    Mat hess = Mat::Zero(2, 2);
    hess(1, 1) = h;
    const auto m = measures::GaussianMeasure(Vec::Zero(2), Mat::Identity(2, 2));
    const auto [e, spec] = est::sorm_estimate_dense(rec, m, hess);
    return e.p / oracles::paraboloid_measure_2d(beta, h);
  };
  const auto run3 = [&](double beta, double h1, double h2) {
    opt::OptimumRecord rec;
    rec.theta_star = (Vec(3) << beta, 0.0, 0.0).finished();
    rec.rate = 0.5 * beta * beta;
    rec.z = beta;
    rec.lambda = beta;
    Mat hess = Mat::Zero(3, 3);
    hess(1, 1) = h1;
    hess(2, 2) = h2;
    const auto m = measures::GaussianMeasure(Vec::Zero(3), Mat::Identity(3, 3));
    const auto [e, spec] = est::sorm_estimate_dense(rec, m, hess);
    return e.p / oracles::paraboloid_measure_3d(beta, h1, h2);
  };

  const double r24 = run2(4.0, 0.11);
  c.check(std::abs(r24 - 1.0) <= 0.05,
          fmt("n=2, |xi*|=4, curvature 0.11: ratio %.4f within 5%%", r24));
  const double r34 = run3(4.0, 0.11, 0.09);
  c.check(std::abs(r34 - 1.0) <= 0.05,
          fmt("n=3, |xi*|=4, curvatures (0.11, 0.09): ratio %.4f within 5%%", r34));
  const double r26 = run2(6.0, 0.065);
  c.check(std::abs(r26 - 1.0) <= 0.02,
          fmt("n=2, |xi*|=6, curvature 0.065: ratio %.4f within 2%% "
              "(best achievable over admissible curvatures is ~1.022: the "
              "asymptotic form keeps the half-space Mills excess)",
              r26));
  const double r36 = run3(6.0, 0.06, 0.06);
  c.check(std::abs(r36 - 1.0) <= 0.02,
          fmt("n=3, |xi*|=6, curvatures (0.06, 0.06): ratio %.4f within 2%%", r36));
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 5: importance-sampling variance on the linear 1D case

int criterion5() {
  Criterion c(5);
  const auto m = measures::GaussianMeasure(Vec::Zero(1), Mat::Identity(1, 1));
  const est::EventOracle oracle = [](const Vec& t) { return t(0); };
  const long n = 10000;
  const int reps = 200;

  auto is_record = [](double z) {
    opt::OptimumRecord rec;
    rec.theta_star = (Vec(1) << z).finished();
    rec.rate = 0.5 * z * z;
    rec.z = z;
    rec.lambda = z;
    return rec;
  };

  // RMSE ratio at z = 4
  {
    const double z = 4.0;
    const double t = normal_tail(z);
    double mse_mc = 0.0, mse_is = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double pm = est::mc_estimate(oracle, m, z, n, 150000 + r).p;
      const double pi = est::is_estimate(oracle, m, is_record(z), z, n, 250000 + r).p;
      mse_mc += (pm - t) * (pm - t);
      mse_is += (pi - t) * (pi - t);
    }
    const double ratio = std::sqrt(mse_mc / mse_is);
    c.check(ratio >= 50.0,
            fmt("empirical RMSE(MC)/RMSE(IS) at z=4, N=1e4: %.1f >= 50", ratio));
  }

  // IS relative RMSE grows like I*^(1/4)
  {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double z : {2.0, 3.0, 4.0, 5.0}) {
      const double t = normal_tail(z);
      double mse = 0.0;
      for (int r = 0; r < reps; ++r) {
        const double p = est::is_estimate(oracle, m, is_record(z), z, n,
                                          350000 + static_cast<long>(100 * z) + r).p;
        mse += (p - t) * (p - t);
      }
      const double scaled =
          std::sqrt(mse / reps) / t / std::pow(0.5 * z * z, 0.25);
      lo = std::min(lo, scaled);
      hi = std::max(hi, scaled);
    }
    c.check(hi / lo <= 1.5,
            fmt("relative RMSE / I*^(1/4) spread over z in {2..5}: %.2fx <= 1.5x",
                hi / lo));
  }
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 6: tsunami qualitative reproduction

int criterion6() {
  Criterion c(6);
  auto setup = acceptance_study();
  const tsunami::EventMap event(setup);
  const auto problem = event.make_problem();
  std::vector<double> lambdas;
  for (double l = 12.0; l <= 48.0 + 1e-9; l += 4.0) lambdas.push_back(l);

  const Vec zero = Vec::Zero(20);
  const Vec draw = measures::sample(setup.prior.measure, derive_seed(1, 1), 1).front();
  const std::vector<Vec> starts{zero, draw};

  // warm sweep: multi-start the first entry, then chain
  std::vector<opt::OptimumRecord> warm;
  {
    opt::OptimumRecord head = minimize_best(problem, lambdas.front(), starts);
    warm.push_back(head);
    Vec current = head.theta_star;
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
      auto rec = opt::minimize_hamiltonian(problem, lambdas[i], current);
      if (rec.converged) current = rec.theta_star;
      warm.push_back(std::move(rec));
    }
  }
  bool all_converged = true, z_increasing = true;
  for (std::size_t i = 0; i < warm.size(); ++i) {
    all_converged = all_converged && warm[i].converged;
    if (i > 0) z_increasing = z_increasing && warm[i].z > warm[i - 1].z;
    std::printf("      lambda=%.0f z=%.4f I*=%.3f iters=%d kkt=%.2e\n",
                warm[i].lambda, warm[i].z, warm[i].rate, warm[i].iterations,
                warm[i].kkt_residual);
  }
  c.check(all_converged, "warm sweep: every entry converged");
  c.check(z_increasing, "warm sweep: z(lambda) strictly increasing");

  // second-order estimates along the sweep
  std::vector<est::ProbabilityEstimate> sorm;
  bool sorm_ok = true, positive_leading = true;
  for (const auto& rec : warm) {
    try {
      auto [e, spec] = est::sorm_estimate_lowrank(
          rec, setup.prior.measure, event.hessian_apply_at(rec.theta_star), 10,
          1e-3);
      for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i)
        positive_leading = positive_leading && spec.eigenvalues(i) > 0.0;
      sorm.push_back(e);
    } catch (const std::exception& ex) {
      std::printf("      sorm at lambda=%.0f failed: %s\n", rec.lambda, ex.what());
      sorm_ok = false;
    }
  }
  c.check(sorm_ok, "second-order estimate defined along the whole sweep");
  c.check(positive_leading, "all retained preconditioned-Hessian eigenvalues positive");
  if (sorm_ok && !sorm.empty()) {
    const double orders = sorm.front().log10_p - sorm.back().log10_p;
    c.check(orders >= 10.0,
            fmt("P_SO drops by %.1f orders of magnitude across the sweep (>= 10)",
                orders));
    bool form_below = true;
    for (const auto& rec : warm) {
      const auto f = est::form_estimate(rec);
      for (const auto& s : sorm)
        if (s.z == rec.z) form_below = form_below && f.p < s.p;
    }
    c.check(form_below, "first-order curve lies below the second-order curve");
  }

  // cold sweep iteration counts
  {
    std::vector<int> iters;
    bool all_ok = true;
    for (double lam : lambdas) {
      const auto rec = minimize_best(problem, lam, starts);
      all_ok = all_ok && rec.converged;
      iters.push_back(rec.iterations);
    }
    int lo = iters.front(), hi = iters.front();
    for (int it : iters) {
      lo = std::min(lo, it);
      hi = std::max(hi, it);
    }
    std::printf("      cold iteration counts:");
    for (int it : iters) std::printf(" %d", it);
    std::printf("\n");
    c.check(all_ok, "cold sweep: every entry converged");
    c.check(hi <= 2.5 * std::max(lo, 1),
            fmt("cold iteration counts within a 2.5x band (%d .. %d)", lo, hi));
  }

  // Monte Carlo comparison where the events are not too rare
  {
    std::vector<double> zs;
    for (const auto& e : sorm) zs.push_back(e.z);
    const auto mc = est::mc_curve(event.oracle_regularized(), setup.prior.measure,
                                  zs, 10000, 77, 1);
    bool overlap = true;
    int compared = 0;
    for (std::size_t i = 0; i < sorm.size(); ++i) {
      if (mc[i].p < 1e-3) continue;
      ++compared;
      const bool inside = mc[i].ci_low <= sorm[i].p && sorm[i].p <= mc[i].ci_high;
      std::printf("      z=%.3f MC=[%.4g, %.4g] SORM=%.4g %s\n", sorm[i].z,
                  mc[i].ci_low, mc[i].ci_high, sorm[i].p,
                  inside ? "inside" : "outside");
      overlap = overlap && inside;
    }
    c.check(compared >= 1, fmt("%d sweep points are MC-comparable (p >= 1e-3)",
                               compared));
    c.check(overlap, "SORM curve inside the MC confidence band where p >= 1e-3");
  }

  // dipole structure of the most likely bathymetry change
  {
    const Vec pert = setup.basis.columns * warm.front().theta_star;
    int up = 0, down = 0;
    for (int j = 1; j < pert.size(); ++j) {
      if (pert(j) > pert(up)) up = j;
      if (pert(j) < pert(down)) down = j;
    }
    const double xup = setup.mesh.a + up * setup.mesh.width();
    const double xdown = setup.mesh.a + down * setup.mesh.width();
    c.check(pert(up) > 0.0 && pert(down) < 0.0 && xup < xdown,
            fmt("optimizer uplift at %.0f km sits shoreward of downlift at %.0f km",
                xup / 1000.0, xdown / 1000.0));
  }
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 7: low-rank spectrum recovery and decay

int criterion7() {
  Criterion c(7);
  // rank-3 synthetic Hessian
  {
    const int n = 12;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal;
    Mat basis = Mat::Zero(n, 3);
    for (int r = 1; r < n; ++r)
      for (int k = 0; k < 3; ++k) basis(r, k) = normal(rng);
    const Mat q = Eigen::HouseholderQR<Mat>(basis).householderQ() *
                  Mat::Identity(n, 3);
    const Vec eigs = (Vec(3) << 0.09, -0.04, 0.015).finished();
    const Mat hess = q * eigs.asDiagonal() * q.transpose();
    const auto m = measures::GaussianMeasure(Vec::Zero(n), Mat::Identity(n, n));
    opt::OptimumRecord rec;
    rec.theta_star = Vec::Zero(n);
    rec.theta_star(0) = 4.0;
    rec.rate = 8.0;
    rec.z = 4.0;
    rec.lambda = 4.0;
    const auto [dense, dense_spec] = est::sorm_estimate_dense(rec, m, hess);
    auto apply = [&](const Vec& v) { return Vec(hess * v); };
    const auto [low, low_spec] = est::sorm_estimate_lowrank(rec, m, apply, 5, 1e-9);
    bool spec_ok = low_spec.eigenvalues.size() >= 3;
    for (int i = 0; i < 3 && spec_ok; ++i)
      spec_ok = std::abs(low_spec.eigenvalues(i) - dense_spec.eigenvalues(i)) <=
                1e-6 * std::abs(dense_spec.eigenvalues(i));
    c.check(spec_ok, "rank-3 synthetic spectrum recovered to 1e-6");
    c.check(std::abs(low.p - dense.p) <= 1e-6 * dense.p,
            "matrix-free estimate matches the dense one to 1e-6");
  }

  // tsunami spectra at the sweep ends
  {
    auto setup = acceptance_study();
    const tsunami::EventMap event(setup);
    const auto problem = event.make_problem();
    const Vec draw =
        measures::sample(setup.prior.measure, derive_seed(1, 1), 1).front();
    for (double lam : {12.0, 48.0}) {
      const auto rec = minimize_best(problem, lam, {Vec::Zero(20), draw});
      if (!rec.converged) {
        c.check(false, fmt("optimization at lambda=%.0f converged", lam));
        continue;
      }
      const auto [e, spec] = est::sorm_estimate_lowrank(
          rec, setup.prior.measure, event.hessian_apply_at(rec.theta_star), 10,
          0.0);
      const int count = static_cast<int>(spec.eigenvalues.size());
      const double head = std::abs(spec.eigenvalues(0));
      const double tail = std::abs(spec.eigenvalues(count - 1));
      std::printf("      lambda=%.0f |eig_1|=%.3g |eig_%d|=%.3g\n", lam, head,
                  count, tail);
      c.check(count >= 10 && head / std::max(tail, 1e-300) >= 1e3,
              fmt("lambda=%.0f: spectrum decays by >= 3 orders within 10 "
                  "eigenvalues", lam));
    }
  }
  return c.finish();
}

// ---------------------------------------------------------------------------
// criterion 8: closed-form optimizer in at most two iterations

int criterion8() {
  Criterion c(8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  bool all = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    Mat a(n, n);
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < n; ++k) a(r, k) = normal(rng);
    const Mat C = a * a.transpose() + 0.2 * Mat::Identity(n, n);
    Vec g(n), start(n);
    for (int i = 0; i < n; ++i) {
      g(i) = normal(rng);
      start(i) = normal(rng);
    }
    const double lambda = 0.5 + std::abs(normal(rng));
    auto measure = std::make_shared<measures::GaussianMeasure>(Vec::Zero(n), C);
    opt::Problem p;
    p.dim = n;
    p.preconditioner = C;
    p.rate = [measure](const Vec& t) { return measures::gaussian_rate(*measure, t); };
    p.rate_grad = [measure](const Vec& t) {
      return measures::gaussian_rate_grad(*measure, t);
    };
    p.f_value = [g](const Vec& t) { return g.dot(t); };
    p.f_grad = [g](const Vec&) { return g; };
    const auto rec = opt::minimize_hamiltonian(p, lambda, start);
    const Vec exact = lambda * (C * g);
    const bool ok = rec.converged && rec.iterations <= 2 &&
                    rec.kkt_residual <= 1e-12 &&
                    (rec.theta_star - exact).norm() <=
                        1e-9 * std::max(1.0, exact.norm());
    all = all && ok;
  }
  c.check(all, "20 random instances: exact optimizer in <= 2 iterations with "
               "KKT residual <= 1e-12");
  return c.finish();
}

}  // namespace

int run_criterion(int n) {
  switch (n) {
    case 1: return criterion1();
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5();
    case 6: return criterion6();
    case 7: return criterion7();
    case 8: return criterion8();
    default:
      std::printf("criterion %d: unknown\n", n);
      return 1;
  }
}

int main(int argc, char** argv) {
  std::vector<int> criteria;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      criteria.push_back(std::atoi(argv[++i]));
  if (criteria.empty())
    for (int n = 1; n <= 8; ++n) criteria.push_back(n);

  int failures = 0;
  for (int n : criteria) failures += run_criterion(n);
  return failures == 0 ? 0 : 1;
}
