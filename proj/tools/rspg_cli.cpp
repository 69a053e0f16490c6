// Command-line front end: run experiments from a JSON config, sweep the step
// ladder, generate synthetic datasets, and run the built-in validation suites.
// Exit codes: 0 success, 2 configuration/input errors, 3 numerical failures.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rspg/rspg.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_offset = 0;
  int parallel = 1;
};

rspg::io::ExperimentConfig load_config(const std::string& path) {
  rspg::io::ExperimentConfig cfg = rspg::io::load_experiment_config(path);
  return cfg;
}

std::filesystem::path config_dir(const std::string& path) {
  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  return dir.empty() ? std::filesystem::path(".") : dir;
}

int cmd_run(const CommonArgs& args, int metric_every_override) {
  rspg::io::ExperimentConfig cfg = load_config(args.config_path);
  if (metric_every_override >= 0) cfg.metric_every = metric_every_override;
  rspg::io::ProblemData data = rspg::io::load_problem_data(cfg, config_dir(args.config_path));
  rspg::io::ExperimentOutcome outcome =
      rspg::io::run_experiment(cfg, data, args.out_dir, args.seed_offset, args.parallel);
  std::cout << "wrote " << outcome.runs.size() << " runs to " << args.out_dir << "\n";
  for (const auto& run : outcome.runs) {
    std::cout << "  " << run.optimizer << " seed " << run.seed << ": "
              << (run.result->status == rspg::RunStatus::Completed ? "completed" : "numerical abort") << ", "
              << run.result->iterations << " iters, ifo " << run.result->total_ifo << ", final loss "
              << rspg::io::format_double(run.result->final_loss) << "\n";
  }
  std::cout << "summary: " << outcome.summary_path.string() << "\n";
  if (outcome.any_abort) {
    std::cerr << "error: numerical: at least one run aborted (see summary.json)" << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_grid(const CommonArgs& args) {
  rspg::io::ExperimentConfig cfg = load_config(args.config_path);
  rspg::io::ProblemData data = rspg::io::load_problem_data(cfg, config_dir(args.config_path));
  rspg::io::GridOutcome outcome = rspg::io::run_grid(cfg, data, args.out_dir, args.seed_offset, args.parallel);
  for (const auto& row : outcome.rows) {
    std::cout << row.optimizer << ": ";
    if (row.best_eta)
      std::cout << "best eta " << rspg::io::format_double(*row.best_eta) << " (median final loss "
                << rspg::io::format_double(*row.best_median_loss) << ")\n";
    else
      std::cout << "no completed runs\n";
  }
  std::cout << "grid: " << outcome.grid_path.string() << "\n";
  return 0;
}

int cmd_check_grad(const std::string& config_path, int samples, int directions, double tol, std::uint64_t seed) {
  rspg::io::ExperimentConfig cfg = load_config(config_path);
  rspg::io::ProblemData data = rspg::io::load_problem_data(cfg, config_dir(config_path));
  rspg::io::GradCheckSuiteReport suite = rspg::io::run_gradient_check_suite(cfg, data, samples, directions, seed);
  for (const auto& entry : suite.entries) {
    std::cout << entry.label << ": max rel err " << rspg::io::format_double(entry.report.max_rel_err)
              << " over " << entry.report.directions << " directions\n";
  }
  std::cout << "overall max rel err: " << rspg::io::format_double(suite.max_rel_err) << " (tol "
            << rspg::io::format_double(tol) << ")\n";
  if (suite.max_rel_err > tol) {
    std::cerr << "error: numerical: gradient check exceeded tolerance" << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_prox_oracle(int instances, std::uint64_t seed, double tol) {
  rspg::validation::OracleSuiteReport report = rspg::validation::run_oracle_suite(instances, seed);
  std::cout << report.cases.size() << " instances\n"
            << "max solution gap:   " << rspg::io::format_double(report.max_zeta_gap) << "\n"
            << "max KKT residual:   " << rspg::io::format_double(report.max_kkt_residual) << "\n"
            << "max objective excess: " << rspg::io::format_double(report.max_objective_excess) << "\n"
            << "max h=0 closed-form gap: " << rspg::io::format_double(report.max_zero_form_gap) << "\n";
  if (report.max_zeta_gap > tol) {
    std::cerr << "error: numerical: subproblem solver disagrees with the oracle" << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  rspg::io::ExperimentConfig cfg = load_config(config_path);
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  if (cfg.kind == rspg::io::ProblemKind::SparsePca) {
    if (!cfg.spca_synth) throw rspg::config_error("synth requires problem.data.synth");
    rspg::SpcaSynthData data = rspg::synth_sparse_pca(*cfg.spca_synth, cfg.synth_seed);
    rspg::io::save_matrix_binary(dir / "spca_data.rmat", data.data);
    rspg::io::save_matrix_binary(dir / "spca_planted.rmat", data.planted);
    std::cout << "wrote " << (dir / "spca_data.rmat").string() << " (" << data.data.rows() << "x"
              << data.data.cols() << ") and spca_planted.rmat\n";
  } else {
    if (!cfg.rmc_synth) throw rspg::config_error("synth requires problem.data.synth");
    rspg::RmcSynthData data = rspg::synth_robust_mc(*cfg.rmc_synth, cfg.synth_seed);
    rspg::Matrix values = rspg::Matrix::Zero(cfg.rmc_synth->m, cfg.rmc_synth->n);
    rspg::Matrix mask = rspg::Matrix::Zero(cfg.rmc_synth->m, cfg.rmc_synth->n);
    for (const auto& e : data.omega) {
      values(e.i, e.j) = e.value;
      mask(e.i, e.j) = 1.0;
    }
    rspg::io::save_matrix_binary(dir / "rmc_values.rmat", values);
    rspg::io::save_matrix_binary(dir / "rmc_mask.rmat", mask);
    rspg::io::save_matrix_binary(dir / "rmc_truth.rmat", data.ground_truth);
    std::cout << "wrote rmc_values.rmat, rmc_mask.rmat, rmc_truth.rmat (" << cfg.rmc_synth->m << "x"
              << cfg.rmc_synth->n << ", " << data.omega.size() << " observed) to " << out_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian stochastic proximal gradient experiments"};
  app.set_version_flag("--version", std::string(rspg::kVersion));
  app.require_subcommand(1);

  CommonArgs args;
  int metric_every_override = -1;

  CLI::App* run = app.add_subcommand("run", "run every configured (optimizer, seed) pair and write CSV + summary");
  run->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  run->add_option("--out", args.out_dir, "output directory")->required();
  run->add_option("--seed-offset", args.seed_offset, "added to every configured seed");
  run->add_option("--parallel", args.parallel, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--metric-every", metric_every_override, "override the config's metric cadence (0 disables)");

  CLI::App* grid = app.add_subcommand("grid", "sweep the step ladder and report the best eta per optimizer");
  grid->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  grid->add_option("--out", args.out_dir, "output directory")->required();
  grid->add_option("--seed-offset", args.seed_offset, "added to every configured seed");
  grid->add_option("--parallel", args.parallel, "worker threads")->check(CLI::PositiveNumber);

  int cg_samples = 5, cg_directions = 20;
  double cg_tol = 1e-5;
  std::uint64_t cg_seed = 20240916;
  CLI::App* check = app.add_subcommand("check-grad", "finite-difference check of the configured problem's gradients");
  check->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  check->add_option("--samples", cg_samples, "per-sample gradients to check")->check(CLI::PositiveNumber);
  check->add_option("--directions", cg_directions, "tangent directions per check")->check(CLI::PositiveNumber);
  check->add_option("--tol", cg_tol, "max relative error accepted");
  check->add_option("--seed", cg_seed, "RNG seed for point and directions");

  int po_instances = 100;
  double po_tol = 1e-6;
  std::uint64_t po_seed = 20240915;
  CLI::App* oracle = app.add_subcommand("prox-oracle", "compare the tangent subproblem solver with the splitting oracle");
  oracle->add_option("--instances", po_instances, "number of random instances")->check(CLI::PositiveNumber);
  oracle->add_option("--seed", po_seed, "suite seed");
  oracle->add_option("--tol", po_tol, "max solver/oracle gap accepted");

  CLI::App* synth = app.add_subcommand("synth", "materialize the config's synthetic dataset to files");
  synth->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  synth->add_option("--out", args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(args, metric_every_override);
    if (grid->parsed()) return cmd_grid(args);
    if (check->parsed()) return cmd_check_grad(args.config_path, cg_samples, cg_directions, cg_tol, cg_seed);
    if (oracle->parsed()) return cmd_prox_oracle(po_instances, po_seed, po_tol);
    if (synth->parsed()) return cmd_synth(args.config_path, args.out_dir);
  } catch (const rspg::config_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rspg::format_error& e) {
    std::cerr << "error: input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rspg::unsupported_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rspg::parameter_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rspg::dimension_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rspg::numerical_error& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
