#include "tailprob/config.hpp"

#include <fstream>

namespace tailprob::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& block,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok)
      throw ConfigError("config: unknown key '" + block + (block.empty() ? "" : ".") +
                        key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<double> read_z_grid(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  reject_unknown(j, "estimator.z_grid", {"from", "to", "count"});
  const double from = j.at("from").get<double>();
  const double to = j.at("to").get<double>();
  const int count = j.at("count").get<int>();
  if (count < 2 || !(to > from))
    throw ConfigError("config: estimator.z_grid needs from < to and count >= 2");
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i)
    grid[i] = from + (to - from) * i / (count - 1);
  return grid;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  reject_unknown(j, "",
                 {"mesh", "time", "viscosity", "bathymetry", "slip_basis", "prior",
                  "objective", "optimizer", "estimator", "slips", "output"});
  if (j.contains("mesh")) {
    const auto& b = j.at("mesh");
    reject_unknown(b, "mesh", {"a_m", "b_m", "elements"});
    read(b, "a_m", cfg.mesh.a);
    read(b, "b_m", cfg.mesh.b);
    read(b, "elements", cfg.mesh.elements);
  }
  if (j.contains("time")) {
    const auto& b = j.at("time");
    reject_unknown(b, "time", {"t_final_s", "cfl", "dt_s"});
    read(b, "t_final_s", cfg.time.t_final);
    read(b, "cfl", cfg.time.cfl);
    read(b, "dt_s", cfg.time.dt);
  }
  if (j.contains("viscosity")) {
    const auto& b = j.at("viscosity");
    reject_unknown(b, "viscosity", {"c_visc"});
    read(b, "c_visc", cfg.viscosity.c_visc);
  }
  if (j.contains("bathymetry")) {
    const auto& b = j.at("bathymetry");
    reject_unknown(b, "bathymetry", {"profile", "file"});
    read(b, "profile", cfg.bathymetry.profile);
    read(b, "file", cfg.bathymetry.file);
  }
  if (j.contains("slip_basis")) {
    const auto& b = j.at("slip_basis");
    reject_unknown(b, "slip_basis",
                   {"kind", "patches", "segment_start_m", "segment_end_m",
                    "peak_m_per_m", "width_factor", "path"});
    read(b, "kind", cfg.slip_basis.kind);
    read(b, "patches", cfg.slip_basis.patches);
    read(b, "segment_start_m", cfg.slip_basis.segment_start);
    read(b, "segment_end_m", cfg.slip_basis.segment_end);
    read(b, "peak_m_per_m", cfg.slip_basis.peak);
    read(b, "width_factor", cfg.slip_basis.width_factor);
    read(b, "path", cfg.slip_basis.path);
    if (cfg.slip_basis.kind != "surrogate" && cfg.slip_basis.kind != "file")
      throw ConfigError("config: slip_basis.kind must be 'surrogate' or 'file'");
    if (cfg.slip_basis.kind == "file" && cfg.slip_basis.path.empty())
      throw ConfigError("config: missing key 'slip_basis.path'");
  }
  if (j.contains("prior")) {
    const auto& b = j.at("prior");
    reject_unknown(b, "prior", {"std_m"});
    read(b, "std_m", cfg.prior.std_dev);
  }
  if (j.contains("objective")) {
    const auto& b = j.at("objective");
    reject_unknown(b, "objective",
                   {"kind", "gamma", "window_m", "lambda", "lambda_grid",
                    "warm_start", "multistart"});
    read(b, "kind", cfg.objective.kind);
    read(b, "gamma", cfg.objective.gamma);
    if (b.contains("window_m")) {
      const auto w = b.at("window_m").get<std::vector<double>>();
      if (w.size() != 2) throw ConfigError("config: objective.window_m needs [c, d]");
      cfg.objective.window_c = w[0];
      cfg.objective.window_d = w[1];
    }
    read(b, "lambda", cfg.objective.lambda);
    read(b, "lambda_grid", cfg.objective.lambda_grid);
    read(b, "warm_start", cfg.objective.warm_start);
    read(b, "multistart", cfg.objective.multistart);
    if (cfg.objective.kind != "regularized" && cfg.objective.kind != "time-optimal")
      throw ConfigError("config: objective.kind must be 'regularized' or 'time-optimal'");
  }
  if (j.contains("optimizer")) {
    const auto& b = j.at("optimizer");
    reject_unknown(b, "optimizer", {"grad_reduction", "max_iter"});
    read(b, "grad_reduction", cfg.optimizer.grad_reduction);
    read(b, "max_iter", cfg.optimizer.max_iter);
  }
  if (j.contains("estimator")) {
    const auto& b = j.at("estimator");
    reject_unknown(b, "estimator",
                   {"method", "samples", "samples_per_optimizer", "seed", "z_grid",
                    "fit_window", "rank", "eig_tol", "sweep_dir"});
    read(b, "method", cfg.estimator.method);
    read(b, "samples", cfg.estimator.samples);
    read(b, "samples_per_optimizer", cfg.estimator.samples_per_optimizer);
    read(b, "seed", cfg.estimator.seed);
    if (b.contains("z_grid")) cfg.estimator.z_grid = read_z_grid(b.at("z_grid"));
    if (b.contains("fit_window")) {
      const auto w = b.at("fit_window").get<std::vector<double>>();
      if (w.size() != 2) throw ConfigError("config: estimator.fit_window needs [lo, hi]");
      cfg.estimator.fit_lo = w[0];
      cfg.estimator.fit_hi = w[1];
    }
    read(b, "rank", cfg.estimator.rank);
    read(b, "eig_tol", cfg.estimator.eig_tol);
    read(b, "sweep_dir", cfg.estimator.sweep_dir);
  }
  if (j.contains("slips")) {
    const auto& b = j.at("slips");
    reject_unknown(b, "slips", {"mode", "seed", "values"});
    read(b, "mode", cfg.slips.mode);
    read(b, "seed", cfg.slips.seed);
    read(b, "values", cfg.slips.values);
    if (cfg.slips.mode != "zero" && cfg.slips.mode != "sample" &&
        cfg.slips.mode != "values")
      throw ConfigError("config: slips.mode must be 'zero', 'sample' or 'values'");
    if (cfg.slips.mode == "values" && cfg.slips.values.empty())
      throw ConfigError("config: missing key 'slips.values'");
  }
  if (j.contains("output")) {
    const auto& b = j.at("output");
    reject_unknown(b, "output", {"dir"});
    read(b, "dir", cfg.output_dir);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["mesh"] = {{"a_m", mesh.a}, {"b_m", mesh.b}, {"elements", mesh.elements}};
  j["time"] = {{"t_final_s", time.t_final}, {"cfl", time.cfl}, {"dt_s", time.dt}};
  j["viscosity"] = {{"c_visc", viscosity.c_visc}};
  j["bathymetry"] = {{"profile", bathymetry.profile}, {"file", bathymetry.file}};
  j["slip_basis"] = {{"kind", slip_basis.kind},
                     {"patches", slip_basis.patches},
                     {"segment_start_m", slip_basis.segment_start},
                     {"segment_end_m", slip_basis.segment_end},
                     {"peak_m_per_m", slip_basis.peak},
                     {"width_factor", slip_basis.width_factor},
                     {"path", slip_basis.path}};
  j["prior"] = {{"std_m", prior.std_dev}};
  j["objective"] = {{"kind", objective.kind},
                    {"gamma", objective.gamma},
                    {"window_m", {objective.window_c, objective.window_d}},
                    {"lambda", objective.lambda},
                    {"lambda_grid", objective.lambda_grid},
                    {"warm_start", objective.warm_start},
                    {"multistart", objective.multistart}};
  j["optimizer"] = {{"grad_reduction", optimizer.grad_reduction},
                    {"max_iter", optimizer.max_iter}};
  j["estimator"] = {{"method", estimator.method},
                    {"samples", estimator.samples},
                    {"samples_per_optimizer", estimator.samples_per_optimizer},
                    {"seed", estimator.seed},
                    {"z_grid", estimator.z_grid},
                    {"fit_window", {estimator.fit_lo, estimator.fit_hi}},
                    {"rank", estimator.rank},
                    {"eig_tol", estimator.eig_tol},
                    {"sweep_dir", estimator.sweep_dir}};
  j["slips"] = {{"mode", slips.mode}, {"seed", slips.seed}, {"values", slips.values}};
  j["output"] = {{"dir", output_dir}};
  return j;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

tsunami::Setup build_setup(const RunConfig& cfg) {
  swe::Mesh mesh(cfg.mesh.a, cfg.mesh.b, cfg.mesh.elements);

  swe::Bathymetry reference = [&] {
    if (!cfg.bathymetry.file.empty())
      return swe::load_bathymetry_csv(cfg.bathymetry.file, mesh);
    if (cfg.bathymetry.profile == "shelf-trench-slice")
      return swe::make_bathymetry(mesh, swe::reference_profile);
    throw ConfigError("config: unknown bathymetry profile '" + cfg.bathymetry.profile +
                      "'");
  }();

  source::SlipBasis basis = [&] {
    if (cfg.slip_basis.kind == "file")
      return source::load_basis_from_file(cfg.slip_basis.path, mesh);
    source::SurrogateParams p;
    p.segment_start = cfg.slip_basis.segment_start;
    p.segment_end = cfg.slip_basis.segment_end;
    p.patches = cfg.slip_basis.patches;
    p.peak = cfg.slip_basis.peak;
    p.width_factor = cfg.slip_basis.width_factor;
    return source::analytic_surrogate_basis(mesh, p);
  }();

  source::SlipPrior prior(basis.patches(), cfg.prior.std_dev);

  const double dt = cfg.time.dt > 0.0
                        ? cfg.time.dt
                        : swe::cfl_timestep(mesh, reference, cfg.time.cfl);
  const double eps = cfg.viscosity.c_visc * mesh.width() * 1.0;  // U_ref = 1 m/s

  return tsunami::Setup{std::move(mesh),
                        std::move(reference),
                        std::move(basis),
                        std::move(prior),
                        swe::ObservationWindow{cfg.objective.window_c,
                                               cfg.objective.window_d},
                        cfg.time.t_final,
                        dt,
                        eps,
                        cfg.objective.gamma};
}

opt::Tolerances build_tolerances(const RunConfig& cfg) {
  opt::Tolerances tol;
  tol.grad_reduction = cfg.optimizer.grad_reduction;
  tol.max_iter = cfg.optimizer.max_iter;
  return tol;
}

}  // namespace tailprob::config
