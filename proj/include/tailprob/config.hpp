#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tailprob/tsunami.hpp"

namespace tailprob::config {

/// Declarative description of one study. Parsed strictly: unknown keys are
/// rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  struct MeshBlock {
    double a = 0.0;
    double b = 400e3;
    int elements = 400;
  } mesh;

  struct TimeBlock {
    double t_final = 4000.0;
    double cfl = 0.3;
    double dt = 0.0;  // 0: derive from cfl
  } time;

  struct ViscosityBlock {
    double c_visc = 1.0;  // eps = c_visc * element width * 1 m/s
  } viscosity;

  struct BathymetryBlock {
    std::string profile = "shelf-trench-slice";
    std::string file;  // two-column CSV overrides the named profile
  } bathymetry;

  struct SlipBasisBlock {
    std::string kind = "surrogate";  // or "file"
    int patches = 20;
    double segment_start = 178e3;
    double segment_end = 187e3;
    double peak = 0.25;
    double width_factor = 2.0;
    std::string path;
  } slip_basis;

  struct PriorBlock {
    double std_dev = 10.0;
  } prior;

  struct ObjectiveBlock {
    std::string kind = "regularized";  // or "time-optimal"
    double gamma = 0.003;
    double window_c = 40e3;
    double window_d = 44e3;
    double lambda = 0.0;                // single-run commands
    std::vector<double> lambda_grid;    // sweep
    bool warm_start = true;
    int multistart = 1;
  } objective;

  struct OptimizerBlock {
    double grad_reduction = 1e-5;
    int max_iter = 500;
  } optimizer;

  struct EstimatorBlock {
    std::string method;  // mc | is | form | sorm | fit
    long samples = 10000;
    long samples_per_optimizer = 100;
    std::uint64_t seed = 1;
    std::vector<double> z_grid;
    double fit_lo = 0.2;
    double fit_hi = 0.4;
    int rank = 10;
    double eig_tol = 1e-3;
    std::string sweep_dir;  // directory holding a prior sweep artifact
  } estimator;

  struct SlipsBlock {
    std::string mode = "zero";  // zero | sample | values
    std::uint64_t seed = 1;
    std::vector<double> values;
  } slips;

  std::string output_dir = "out";

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  std::string hash() const;
};

/// Instantiates mesh, bathymetry, slip basis, prior and time step.
tsunami::Setup build_setup(const RunConfig& cfg);

opt::Tolerances build_tolerances(const RunConfig& cfg);

}  // namespace tailprob::config
