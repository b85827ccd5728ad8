#include <iostream>

#include "CLI11.hpp"
#include "tailprob/cli_commands.hpp"

using namespace tailprob;

int main(int argc, char** argv) {
  CLI::App app{"tail probabilities for PDE-governed events: LDT optimization, "
               "importance sampling and first/second-order set approximations, "
               "with a built-in 1D shallow-water tsunami model"};
  app.require_subcommand(1);
  app.fallthrough(true);  // global flags may follow the subcommand

  std::string config_path;
  cli::CommonOptions opts;
  app.add_option("--config", config_path, "path to the JSON run configuration")
      ->required();
  app.add_option("--out", opts.out_dir, "output directory (overrides config)");
  auto* seed_opt = app.add_option("--seed", opts.seed, "seed override");
  app.add_option("--workers", opts.workers,
                 "worker threads for sample fan-out (0: all cores)");

  auto* solve = app.add_subcommand("solve", "forward solve for configured slips");
  int directions = 5;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "adjoint gradient vs finite differences");
  gradcheck->add_option("--directions", directions, "number of random directions");
  auto* sweep = app.add_subcommand("sweep", "lambda sweep of LDT optimizations");
  auto* estimate = app.add_subcommand("estimate", "probability estimate curves");
  int rank = 10;
  auto* eigs = app.add_subcommand("eigs", "preconditioned event Hessian spectrum");
  eigs->add_option("--rank", rank, "number of dominant eigenvalues");

  CLI11_PARSE(app, argc, argv);
  opts.seed_given = seed_opt->count() > 0;

  try {
    const config::RunConfig cfg = config::RunConfig::from_file(config_path);
    if (solve->parsed()) return cli::cmd_solve(cfg, opts);
    if (gradcheck->parsed()) return cli::cmd_gradcheck(cfg, opts, directions);
    if (sweep->parsed()) return cli::cmd_sweep(cfg, opts);
    if (estimate->parsed()) return cli::cmd_estimate(cfg, opts);
    if (eigs->parsed()) return cli::cmd_eigs(cfg, opts, rank);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
