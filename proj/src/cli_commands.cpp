#include "tailprob/cli_commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace tailprob::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

struct Manifest {
  std::string command;
  const config::RunConfig* cfg;
  CommonOptions opts;
  std::vector<std::string> outputs;
  json extra = json::object();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["config"] = cfg->to_json();
    j["config_hash"] = cfg->hash();
    j["seed"] = opts.seed;
    j["workers"] = opts.workers;
    j["outputs"] = outputs;
    if (!extra.empty()) j["extra"] = extra;
    j["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << "\n";
  }
};

fs::path prepare_out_dir(const config::RunConfig& cfg, const CommonOptions& opts) {
  const fs::path dir = opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;
  fs::create_directories(dir);
  return dir;
}

Vec configured_slips(const config::RunConfig& cfg, const tsunami::Setup& setup,
                     std::uint64_t seed) {
  const int n = setup.prior.measure.dim();
  if (cfg.slips.mode == "zero") return Vec::Zero(n);
  if (cfg.slips.mode == "sample")
    return measures::sample(setup.prior.measure, seed, 1).front();
  if (static_cast<int>(cfg.slips.values.size()) != n)
    throw ConfigError("config: slips.values has " +
                      std::to_string(cfg.slips.values.size()) + " entries, expected " +
                      std::to_string(n));
  return Eigen::Map<const Vec>(cfg.slips.values.data(), n);
}

void write_curve_csv(const fs::path& path,
                     const std::vector<est::ProbabilityEstimate>& curve) {
  std::ofstream out(path);
  out << "z,p,ci_low,ci_high,method\n";
  for (const auto& e : curve)
    out << fmt(e.z) << ',' << fmt(e.p) << ',' << fmt(e.ci_low) << ','
        << fmt(e.ci_high) << ',' << e.method << '\n';
}

void append_prefactor_rows(std::ofstream& out, const std::vector<est::ZP>& rows,
                           const std::string& method) {
  for (const auto& [z, c0] : rows)
    out << fmt(z) << ',' << fmt(c0) << ',' << method << '\n';
}

est::EventOracle pick_oracle(const tsunami::EventMap& event,
                             const config::RunConfig& cfg) {
  return cfg.objective.kind == "time-optimal" ? event.oracle_timeopt()
                                              : event.oracle_regularized();
}

}  // namespace

json sweep_to_json(const opt::SweepResult& sweep) {
  json recs = json::array();
  for (const auto& r : sweep.records) {
    json jr;
    jr["lambda"] = r.lambda;
    jr["z"] = r.z;
    jr["rate"] = r.rate;
    jr["kkt_residual"] = r.kkt_residual;
    jr["iterations"] = r.iterations;
    jr["converged"] = r.converged;
    jr["note"] = r.note;
    jr["objective_kind"] = r.objective_kind;
    jr["level_star"] = r.level_star;
    jr["theta_star"] = std::vector<double>(
        r.theta_star.data(), r.theta_star.data() + r.theta_star.size());
    recs.push_back(std::move(jr));
  }
  return json{{"records", recs}, {"warm_started", sweep.warm_started}};
}

opt::SweepResult sweep_from_json(const json& j) {
  opt::SweepResult sweep;
  sweep.warm_started = j.at("warm_started").get<bool>();
  for (const auto& jr : j.at("records")) {
    opt::OptimumRecord r;
    r.lambda = jr.at("lambda").get<double>();
    r.z = jr.at("z").get<double>();
    r.rate = jr.at("rate").get<double>();
    r.kkt_residual = jr.at("kkt_residual").get<double>();
    r.iterations = jr.at("iterations").get<int>();
    r.converged = jr.at("converged").get<bool>();
    r.note = jr.at("note").get<std::string>();
    r.objective_kind = jr.at("objective_kind").get<std::string>();
    r.level_star = jr.at("level_star").get<int>();
    const auto theta = jr.at("theta_star").get<std::vector<double>>();
    r.theta_star = Eigen::Map<const Vec>(theta.data(), theta.size());
    sweep.records.push_back(std::move(r));
  }
  return sweep;
}

opt::SweepResult load_sweep_artifact(const std::string& dir) {
  const fs::path path = fs::path(dir) / "sweep.json";
  std::ifstream in(path);
  if (!in)
    throw ConfigError("no sweep artifact at " + path.string() +
                      "; run the sweep command first and point estimator.sweep_dir "
                      "at its output directory");
  json j;
  in >> j;
  return sweep_from_json(j);
}

int cmd_solve(const config::RunConfig& cfg, const CommonOptions& opts) {
  const fs::path dir = prepare_out_dir(cfg, opts);
  Manifest manifest{"solve", &cfg, opts};

  const tsunami::Setup setup = config::build_setup(cfg);
  const tsunami::EventMap event(setup);
  const std::uint64_t seed = opts.seed_given ? opts.seed : cfg.slips.seed;
  const Vec slips = configured_slips(cfg, setup, seed);

  const auto traj = event.solve(slips);

  {
    std::ofstream out(dir / "observable.csv");
    out << "t,f_ob\n";
    for (int m = 0; m <= traj.steps; ++m)
      out << fmt_short(traj.time(m)) << ',' << fmt(traj.f_levels(m)) << '\n';
    manifest.outputs.push_back("observable.csv");
  }
  {
    std::ofstream out(dir / "bathymetry.csv");
    out << "x,b,b_ref,perturbation\n";
    for (int jn = 0; jn <= setup.mesh.elements; ++jn) {
      const double x = setup.mesh.a + jn * setup.mesh.width();
      out << fmt_short(x) << ',' << fmt(traj.bathy.nodal(jn)) << ','
          << fmt(traj.bathy.nodal_ref(jn)) << ','
          << fmt(traj.bathy.nodal(jn) - traj.bathy.nodal_ref(jn)) << '\n';
    }
    manifest.outputs.push_back("bathymetry.csv");
  }
  {
    const int stride = std::max(1, traj.steps / 100);
    swe::export_trajectory_csv(traj, (dir / "trajectory.csv").string(), stride);
    manifest.outputs.push_back("trajectory.csv");
  }
  manifest.extra["slips"] = std::vector<double>(slips.data(), slips.data() + slips.size());
  manifest.extra["mass_drift_rel"] =
      std::abs(traj.mass(traj.steps) - traj.mass(0)) / std::abs(traj.mass(0));
  manifest.write(dir);
  return 0;
}

int cmd_gradcheck(const config::RunConfig& cfg, const CommonOptions& opts,
                  int directions) {
  const fs::path dir = prepare_out_dir(cfg, opts);
  Manifest manifest{"gradcheck", &cfg, opts};

  const tsunami::Setup setup = config::build_setup(cfg);
  const tsunami::EventMap event(setup);
  const double lambda = cfg.objective.lambda;
  const std::uint64_t seed = opts.seed_given ? opts.seed : 1;
  const bool timeopt = cfg.objective.kind == "time-optimal";

  // base point: a prior draw
  const Vec base = measures::sample(setup.prior.measure, seed, 1).front();

  // objective value and gradient at fixed observation level (time-optimal)
  int level = 0;
  if (timeopt) {
    const Vec f = event.level_trace(base);
    for (Eigen::Index m = 1; m < f.size(); ++m)
      if (f(m) > f(level)) level = static_cast<int>(m);
  }
  auto j_value = [&](const Vec& s) {
    const double rate = source::slip_rate(setup.prior, s);
    if (lambda == 0.0) return rate;
    const double f = timeopt ? event.level_trace(s)(level) : event.f_gamma(s);
    return rate - lambda * f;
  };
  auto j_grad = [&](const Vec& s) -> Vec {
    Vec g = source::slip_rate_grad(setup.prior, s);
    if (lambda != 0.0)
      g -= lambda * (timeopt ? event.f_grad_at_level(s, level)
                             : event.f_gamma_grad(s));
    return g;
  };

  const Vec grad = j_grad(base);
  const double scale = std::max(base.norm(), 1.0);

  std::mt19937_64 rng(derive_seed(seed, 999));
  std::normal_distribution<double> normal;

  std::ofstream out(dir / "gradcheck.csv");
  out << "direction,step,fd,adjoint,rel_error\n";
  double worst_min = 0.0;
  for (int d = 0; d < directions; ++d) {
    Vec dir_vec(base.size());
    for (Eigen::Index i = 0; i < base.size(); ++i) dir_vec(i) = normal(rng);
    dir_vec.normalize();
    const double adjoint_value = grad.dot(dir_vec);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 4; ++k) {
      const double step = 1e-3 * scale * std::pow(10.0, -k);
      const double fd =
          (j_value(base + step * dir_vec) - j_value(base - step * dir_vec)) /
          (2.0 * step);
      const double rel = std::abs(fd - adjoint_value) /
                         std::max(std::abs(adjoint_value), 1e-300);
      best = std::min(best, rel);
      out << d << ',' << fmt(step) << ',' << fmt(fd) << ',' << fmt(adjoint_value)
          << ',' << fmt(rel) << '\n';
    }
    std::cout << "direction " << d << ": min rel error " << best << "\n";
    worst_min = std::max(worst_min, best);
  }
  manifest.outputs.push_back("gradcheck.csv");
  manifest.extra["worst_min_rel_error"] = worst_min;
  manifest.write(dir);
  if (worst_min > 1e-5) {
    std::cerr << "gradcheck FAILED: worst min-over-steps relative error " << worst_min
              << " > 1e-5\n";
    return 1;
  }
  return 0;
}

namespace {

opt::SweepResult run_sweep(const config::RunConfig& cfg, const tsunami::EventMap& event,
                           std::uint64_t seed) {
  if (cfg.objective.lambda_grid.empty())
    throw ConfigError("config: missing key 'objective.lambda_grid'");
  const opt::Tolerances tol = config::build_tolerances(cfg);
  const int n = event.setup().prior.measure.dim();
  const Vec zero = Vec::Zero(n);
  const bool warm = cfg.objective.warm_start;

  const bool timeopt = cfg.objective.kind == "time-optimal";
  auto run_one_grid = [&](const std::vector<double>& grid, bool warm_mode,
                          const Vec& start) {
    if (timeopt)
      return opt::sweep_lambda_timeopt(event.make_time_problem(), grid, warm_mode,
                                       start, tol);
    return opt::sweep_lambda(event.make_problem(), grid, warm_mode, start, tol);
  };
  auto multistart_points = [&] {
    std::vector<Vec> starts{zero};
    for (int ms = 1; ms < cfg.objective.multistart; ++ms)
      starts.push_back(
          measures::sample(event.setup().prior.measure, derive_seed(seed, ms), 1)
              .front());
    return starts;
  };
  auto better = [](const opt::OptimumRecord& a, const opt::OptimumRecord& b) {
    // lower Hamiltonian wins among converged records
    const double ha = a.rate - a.lambda * a.z;
    const double hb = b.rate - b.lambda * b.z;
    return b.converged && (!a.converged || hb < ha);
  };

  if (!warm) {
    opt::SweepResult sweep = run_one_grid(cfg.objective.lambda_grid, false, zero);
    // multi-start surfaces multimodality: keep the best Hamiltonian per lambda
    const auto starts = multistart_points();
    for (std::size_t ms = 1; ms < starts.size(); ++ms) {
      const opt::SweepResult other =
          run_one_grid(cfg.objective.lambda_grid, false, starts[ms]);
      for (std::size_t i = 0; i < sweep.records.size(); ++i)
        if (better(sweep.records[i], other.records[i]))
          sweep.records[i] = other.records[i];
    }
    return sweep;
  }

  // Warm sweep: multi-start only the first entry (the flat reference start
  // sits in a shallow spurious basin of the softened objective), then chain.
  const std::vector<double> first{cfg.objective.lambda_grid.front()};
  opt::OptimumRecord head;
  bool have_head = false;
  for (const Vec& start : multistart_points()) {
    const opt::SweepResult one = run_one_grid(first, false, start);
    if (!have_head || better(head, one.records.front())) {
      head = one.records.front();
      have_head = true;
    }
  }
  opt::SweepResult sweep;
  sweep.warm_started = true;
  sweep.records.push_back(head);
  if (cfg.objective.lambda_grid.size() > 1) {
    const std::vector<double> rest(cfg.objective.lambda_grid.begin() + 1,
                                   cfg.objective.lambda_grid.end());
    const Vec chain_start = head.converged ? head.theta_star : zero;
    const opt::SweepResult tail = run_one_grid(rest, true, chain_start);
    for (const auto& r : tail.records) sweep.records.push_back(r);
  }
  return sweep;
}

}  // namespace

int cmd_sweep(const config::RunConfig& cfg, const CommonOptions& opts) {
  const fs::path dir = prepare_out_dir(cfg, opts);
  Manifest manifest{"sweep", &cfg, opts};

  const tsunami::Setup setup = config::build_setup(cfg);
  const tsunami::EventMap event(setup);
  const std::uint64_t seed = opts.seed_given ? opts.seed : 1;

  opt::SweepResult sweep = run_sweep(cfg, event, seed);

  {
    std::ofstream out(dir / "sweep.json");
    json j = sweep_to_json(sweep);
    j["config_hash"] = cfg.hash();
    out << j.dump(2) << "\n";
    manifest.outputs.push_back("sweep.json");
  }

  const int max_rank = setup.prior.measure.dim() - 1;
  const int rank = std::min(cfg.estimator.rank, max_rank);

  std::ofstream out(dir / "sweep.csv");
  out << "lambda,z,i_star,iterations,kkt_residual,p_form,p_sorm_lowrank,converged\n";
  for (const auto& rec : sweep.records) {
    std::string p_form = "nan", p_sorm = "nan";
    if (rec.converged) {
      p_form = fmt(est::form_estimate(rec).p);
      try {
        const auto [sorm, spectrum] = est::sorm_estimate_lowrank(
            rec, setup.prior.measure,
            event.hessian_apply_at(rec.theta_star), rank, cfg.estimator.eig_tol);
        p_sorm = fmt(sorm.p);
      } catch (const std::exception& e) {
        std::cerr << "sorm at lambda=" << rec.lambda << " failed: " << e.what()
                  << "\n";
      }
    }
    out << fmt_short(rec.lambda) << ',' << fmt(rec.z) << ',' << fmt(rec.rate) << ','
        << rec.iterations << ',' << fmt(rec.kkt_residual) << ',' << p_form << ','
        << p_sorm << ',' << (rec.converged ? 1 : 0) << '\n';

    // optimizer slips and bathymetry perturbation for this lambda
    char name[64];
    std::snprintf(name, sizeof name, "optimizer_slips_lambda%g.csv", rec.lambda);
    {
      std::ofstream so(dir / name);
      so << "patch,slip\n";
      for (Eigen::Index i = 0; i < rec.theta_star.size(); ++i)
        so << (i + 1) << ',' << fmt(rec.theta_star(i)) << '\n';
      manifest.outputs.push_back(name);
    }
    std::snprintf(name, sizeof name, "optimizer_bperturb_lambda%g.csv", rec.lambda);
    {
      const swe::Bathymetry b = event.bathymetry(rec.theta_star);
      std::ofstream bo(dir / name);
      bo << "x,perturbation\n";
      for (int jn = 0; jn <= setup.mesh.elements; ++jn)
        bo << fmt_short(setup.mesh.a + jn * setup.mesh.width()) << ','
           << fmt(b.nodal(jn) - b.nodal_ref(jn)) << '\n';
      manifest.outputs.push_back(name);
    }
  }
  manifest.outputs.push_back("sweep.csv");
  manifest.write(dir);
  return 0;
}

int cmd_estimate(const config::RunConfig& cfg, const CommonOptions& opts) {
  const fs::path dir = prepare_out_dir(cfg, opts);
  Manifest manifest{"estimate", &cfg, opts};

  if (cfg.estimator.method.empty())
    throw ConfigError("config: missing key 'estimator.method'");
  if (cfg.estimator.z_grid.empty())
    throw ConfigError("config: missing key 'estimator.z_grid'");

  const tsunami::Setup setup = config::build_setup(cfg);
  const tsunami::EventMap event(setup);
  const est::EventOracle oracle = pick_oracle(event, cfg);
  const std::uint64_t seed = opts.seed_given ? opts.seed : cfg.estimator.seed;

  std::vector<std::string> methods;
  {
    std::string m = cfg.estimator.method;
    std::size_t pos = 0;
    while (pos != std::string::npos) {
      const std::size_t comma = m.find(',', pos);
      methods.push_back(m.substr(pos, comma - pos));
      pos = comma == std::string::npos ? comma : comma + 1;
    }
  }

  auto needs_sweep = [](const std::string& m) {
    return m == "is" || m == "form" || m == "sorm" || m == "fit";
  };
  std::optional<opt::SweepResult> sweep;
  for (const auto& m : methods)
    if (needs_sweep(m) && !sweep) {
      if (cfg.estimator.sweep_dir.empty())
        throw ConfigError("estimator method '" + m +
                          "' needs a prior sweep artifact: set estimator.sweep_dir");
      sweep = load_sweep_artifact(cfg.estimator.sweep_dir);
    }

  std::vector<est::ProbabilityEstimate> merged;
  std::optional<std::vector<est::ZP>> mc_zp;

  for (const auto& method : methods) {
    std::vector<est::ProbabilityEstimate> curve;
    if (method == "mc") {
      curve = est::mc_curve(oracle, setup.prior.measure, cfg.estimator.z_grid,
                            cfg.estimator.samples, seed, opts.workers);
      mc_zp.emplace();
      for (const auto& e : curve) mc_zp->push_back({e.z, e.p});
    } else if (method == "is") {
      // one batch per optimizer, thresholds served by the nearest z(lambda)
      std::vector<const opt::OptimumRecord*> recs;
      for (const auto& r : sweep->records)
        if (r.converged) recs.push_back(&r);
      if (recs.empty()) throw ConfigError("sweep artifact has no converged records");
      std::vector<std::optional<est::SampleBatch>> batches(recs.size());
      for (double z : cfg.estimator.z_grid) {
        std::size_t nearest = 0;
        for (std::size_t i = 1; i < recs.size(); ++i)
          if (std::abs(recs[i]->z - z) < std::abs(recs[nearest]->z - z)) nearest = i;
        if (!batches[nearest])
          batches[nearest] = est::run_batch(
              oracle, setup.prior.measure, recs[nearest]->theta_star,
              cfg.estimator.samples_per_optimizer, derive_seed(seed, nearest),
              opts.workers);
        curve.push_back(
            est::is_estimate_from_batch(*batches[nearest], recs[nearest]->rate, z));
      }
    } else if (method == "form") {
      for (const auto& r : sweep->records)
        if (r.converged) curve.push_back(est::form_estimate(r));
    } else if (method == "sorm") {
      const int rank = std::min(cfg.estimator.rank, setup.prior.measure.dim() - 1);
      for (const auto& r : sweep->records) {
        if (!r.converged) continue;
        const auto [e, spectrum] = est::sorm_estimate_lowrank(
            r, setup.prior.measure, event.hessian_apply_at(r.theta_star), rank,
            cfg.estimator.eig_tol);
        curve.push_back(e);
      }
    } else if (method == "fit") {
      if (!mc_zp) {
        auto mc = est::mc_curve(oracle, setup.prior.measure, cfg.estimator.z_grid,
                                cfg.estimator.samples, seed, opts.workers);
        mc_zp.emplace();
        for (const auto& e : mc) mc_zp->push_back({e.z, e.p});
      }
      const est::FitResult fit = est::fit_constant_prefactor(
          *mc_zp, *sweep, cfg.estimator.fit_lo, cfg.estimator.fit_hi);
      manifest.extra["fit_c0"] = fit.c0;
      for (const auto& [z, p] : fit.curve) {
        est::ProbabilityEstimate e;
        e.z = z;
        e.p = p;
        e.log10_p = p > 0 ? std::log10(p) : -INFINITY;
        e.method = "fit";
        curve.push_back(e);
      }
    } else {
      throw ConfigError("config: unknown estimator method '" + method + "'");
    }
    write_curve_csv(dir / (method + ".csv"), curve);
    manifest.outputs.push_back(method + ".csv");
    merged.insert(merged.end(), curve.begin(), curve.end());
  }

  write_curve_csv(dir / "merged.csv", merged);
  manifest.outputs.push_back("merged.csv");

  if (sweep) {
    std::ofstream out(dir / "prefactor.csv");
    out << "z,c0,method\n";
    for (const auto& method : methods) {
      std::vector<est::ProbabilityEstimate> curve;
      for (const auto& e : merged)
        if (e.method == method || (method == "sorm" && e.method == "sorm-lowrank"))
          curve.push_back(e);
      append_prefactor_rows(out, est::prefactor_extract(curve, *sweep), method);
    }
    manifest.outputs.push_back("prefactor.csv");
  }
  manifest.write(dir);
  return 0;
}

int cmd_eigs(const config::RunConfig& cfg, const CommonOptions& opts, int rank) {
  const fs::path dir = prepare_out_dir(cfg, opts);
  Manifest manifest{"eigs", &cfg, opts};

  const tsunami::Setup setup = config::build_setup(cfg);
  const tsunami::EventMap event(setup);
  if (cfg.estimator.sweep_dir.empty())
    throw ConfigError("eigs needs a prior sweep artifact: set estimator.sweep_dir");
  const opt::SweepResult sweep = load_sweep_artifact(cfg.estimator.sweep_dir);

  const double lambda = cfg.objective.lambda;
  const opt::OptimumRecord* rec = nullptr;
  for (const auto& r : sweep.records)
    if (r.converged && std::abs(r.lambda - lambda) < 1e-9 * std::max(1.0, lambda))
      rec = &r;
  if (!rec)
    throw ConfigError("sweep artifact has no converged record for lambda=" +
                      std::to_string(lambda));

  const int max_rank = setup.prior.measure.dim() - 1;
  if (rank > max_rank) {
    std::cerr << "warning: rank " << rank << " clamped to n-1 = " << max_rank << "\n";
    rank = max_rank;
  }
  const auto [e, spectrum] = est::sorm_estimate_lowrank(
      *rec, setup.prior.measure, event.hessian_apply_at(rec->theta_star), rank,
      /*tol=*/0.0);

  std::ofstream out(dir / "eigs.csv");
  out << "i,lambda_i,lambda_times_lambda_i\n";
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i)
    out << (i + 1) << ',' << fmt(spectrum.eigenvalues(i)) << ','
        << fmt(lambda * spectrum.eigenvalues(i)) << '\n';
  manifest.outputs.push_back("eigs.csv");
  manifest.extra["p_sorm_lowrank"] = e.p;
  manifest.write(dir);
  return 0;
}

}  // namespace tailprob::cli
