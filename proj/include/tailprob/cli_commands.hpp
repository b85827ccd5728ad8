#pragma once

#include <string>

#include "tailprob/config.hpp"

namespace tailprob::cli {

struct CommonOptions {
  std::string out_dir;  // overrides config output.dir when nonempty
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned workers = 0;  // 0: hardware concurrency
};

/// Forward solve for configured slips; writes the observable trace, the
/// bathymetry perturbation, a (strided) trajectory dump and a run manifest.
int cmd_solve(const config::RunConfig& cfg, const CommonOptions& opts);

/// Adjoint-vs-finite-difference check over random directions; writes the
/// per-direction step sweep CSV; exit 1 if any direction's best relative
/// error exceeds 1e-5.
int cmd_gradcheck(const config::RunConfig& cfg, const CommonOptions& opts,
                  int directions);

/// Lambda sweep (warm or cold per config) with per-lambda FORM and low-rank
/// SORM columns; persists the sweep artifact consumed by estimate/eigs.
int cmd_sweep(const config::RunConfig& cfg, const CommonOptions& opts);

/// Estimator curves (mc, is, form, sorm, fit — comma-separated in
/// estimator.method) plus a merged comparison file and prefactor extraction.
int cmd_estimate(const config::RunConfig& cfg, const CommonOptions& opts);

/// Spectrum of the projected covariance-preconditioned event Hessian at the
/// sweep optimizer for objective.lambda.
int cmd_eigs(const config::RunConfig& cfg, const CommonOptions& opts, int rank);

/// Sweep artifact (de)serialization, shared with the tests.
nlohmann::json sweep_to_json(const opt::SweepResult& sweep);
opt::SweepResult sweep_from_json(const nlohmann::json& j);
opt::SweepResult load_sweep_artifact(const std::string& dir);

}  // namespace tailprob::cli
