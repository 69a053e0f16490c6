#pragma once

// Experiment drivers behind the command line: materialize the configured
// problem, run every (optimizer, seed) pair, write one trajectory CSV per run
// plus a summary.json, and sweep a fixed step ladder for tuning. Runs are
// independent jobs (fresh problem instance, fresh RNG streams per seed), so
// the worker pool cannot change any result, only the wall time.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "rspg/errors.hpp"
#include "rspg/io/config.hpp"
#include "rspg/io/matrix_io.hpp"
#include "rspg/manifold.hpp"
#include "rspg/metrics.hpp"
#include "rspg/optimizers.hpp"
#include "rspg/problems/robust_mc.hpp"
#include "rspg/problems/sparse_pca.hpp"
#include "rspg/problems/synth.hpp"
#include "rspg/rng.hpp"
#include "rspg/validation/gradient_check.hpp"
#include "rspg/version.hpp"

namespace rspg::io {

// The step ladder swept by the tuner (log-spaced, two points per decade).
inline const std::vector<double>& grid_eta_ladder() {
  static const std::vector<double> ladder = {5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1, 1.0};
  return ladder;
}

// Problem inputs resolved from files or the seeded generator; loaded once and
// shared read-only by all jobs. Each job builds its own problem instance on
// top (robust MC carries mutable block state).
struct ProblemData {
  Matrix spca_data;                  // n x d
  std::vector<ObservedEntry> omega;  // robust MC observations
  int rmc_rows = 0;
  int rmc_cols = 0;
};

namespace detail {

inline Matrix load_matrix_any(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return load_matrix_csv(path);
  return load_matrix_binary(path);
}

inline std::filesystem::path resolve_against(const std::filesystem::path& base_dir, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : base_dir / p;
}

}  // namespace detail

inline std::vector<ObservedEntry> entries_from_mask(const Matrix& values, const Matrix& mask) {
  if (values.rows() != mask.rows() || values.cols() != mask.cols())
    throw dimension_error("observed-value and mask matrices must have identical shapes");
  std::vector<ObservedEntry> omega;
  for (int i = 0; i < values.rows(); ++i)
    for (int j = 0; j < values.cols(); ++j)
      if (mask(i, j) != 0.0) omega.push_back({i, j, values(i, j)});
  return omega;
}

inline ProblemData load_problem_data(const ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  ProblemData data;
  if (cfg.kind == ProblemKind::SparsePca) {
    if (cfg.spca_file) {
      data.spca_data = detail::load_matrix_any(detail::resolve_against(base_dir, *cfg.spca_file));
    } else {
      data.spca_data = synth_sparse_pca(*cfg.spca_synth, cfg.synth_seed).data;
    }
    if (data.spca_data.cols() < cfg.rank)
      throw config_error("problem.r exceeds the data dimension");
  } else {
    if (cfg.rmc_values_file) {
      Matrix values = detail::load_matrix_any(detail::resolve_against(base_dir, *cfg.rmc_values_file));
      Matrix mask = detail::load_matrix_any(detail::resolve_against(base_dir, *cfg.rmc_mask_file));
      data.omega = entries_from_mask(values, mask);
      data.rmc_rows = static_cast<int>(values.rows());
      data.rmc_cols = static_cast<int>(values.cols());
    } else {
      RmcSynthData synth = synth_robust_mc(*cfg.rmc_synth, cfg.synth_seed);
      data.omega = std::move(synth.omega);
      data.rmc_rows = cfg.rmc_synth->m;
      data.rmc_cols = cfg.rmc_synth->n;
    }
    if (data.omega.empty()) throw config_error("robust MC data has no observed entries");
    if (data.rmc_rows < cfg.rank) throw config_error("problem.r exceeds the number of matrix rows");
  }
  return data;
}

inline int problem_num_samples(const ExperimentConfig& cfg, const ProblemData& data) {
  return cfg.kind == ProblemKind::SparsePca ? static_cast<int>(data.spca_data.rows())
                                            : static_cast<int>(data.omega.size());
}

inline int problem_point_rows(const ExperimentConfig& cfg, const ProblemData& data) {
  return cfg.kind == ProblemKind::SparsePca ? static_cast<int>(data.spca_data.cols()) : data.rmc_rows;
}

inline Geometry problem_geometry(const ExperimentConfig& cfg) {
  return cfg.kind == ProblemKind::SparsePca ? Geometry::Stiefel : Geometry::Grassmann;
}

// Fill in what the config left to the algorithm defaults, now that n is known.
inline OptimizerConfig materialize_optimizer(const ExperimentConfig& cfg, const OptimizerSpec& spec, int n) {
  OptimizerConfig out = spec.config;
  if (!spec.batch_given) out.batch = default_batch_for(out.algorithm, n);
  out.metric_every = cfg.metric_every;
  out.record_wall_time = cfg.record_wall_time;
  return out;
}

template <class Observer = NullObserver>
RunResult run_single(const ExperimentConfig& cfg, const ProblemData& data, const OptimizerConfig& opt,
                     std::uint64_t seed, Observer&& observer = Observer{}) {
  const int rows = problem_point_rows(cfg, data);
  Rng init_rng = make_stream(seed, SeedStream::Init);
  StiefelPoint x0 = random_point(rows, cfg.rank, init_rng, problem_geometry(cfg));
  if (cfg.kind == ProblemKind::SparsePca) {
    SparsePcaProblem problem(data.spca_data, cfg.mu, cfg.mode, cfg.gradient);
    return run_optimizer(problem, x0, opt, seed, std::forward<Observer>(observer));
  }
  RobustMcProblem problem(data.rmc_rows, data.rmc_cols, data.omega, cfg.lambda, cfg.l1_weight);
  return run_optimizer(problem, x0, opt, seed, std::forward<Observer>(observer));
}

inline void write_trajectory_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records) {
  std::ofstream out(path, std::ios::binary);  // binary: keep \n line ends everywhere
  if (!out) throw format_error("cannot open '" + path.string() + "' for writing");
  out << "t,ifo,loss,zeta_norm,est_err_sq,g_norm,wall_ms\n";
  auto opt_cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : records) {
    out << r.t << ',' << r.ifo << ',' << format_double(r.loss) << ',' << opt_cell(r.zeta_norm) << ','
        << opt_cell(r.est_err_sq) << ',' << opt_cell(r.g_norm) << ',' << opt_cell(r.wall_ms) << '\n';
  }
  if (!out) throw format_error("short write to '" + path.string() + "'");
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw parameter_error("median of an empty set");
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace detail {

// Run `jobs` tasks on `workers` threads. Tasks are independent; the first
// captured exception is rethrown on the calling thread after all workers join.
template <class Fn>
void parallel_for(int jobs, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, jobs));
  if (workers == 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        int j = next.fetch_add(1);
        if (j >= jobs || failed.load()) return;
        try {
          fn(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

struct RunOutcome {
  std::string optimizer;
  std::uint64_t seed = 0;
  std::string csv;  // file name relative to the output directory
  std::optional<RunResult> result;  // set for every slot once the driver returns
};

struct ExperimentOutcome {
  std::vector<RunOutcome> runs;
  bool any_abort = false;
  std::filesystem::path summary_path;
};

inline Json summarize_runs(const ExperimentConfig& cfg, const std::vector<RunOutcome>& runs) {
  Json summary;
  summary["version"] = kVersion;
  summary["stationarity_variant"] = "unscaled";  // G = (X - Retr_X(xi)) / gamma
  summary["config"] = cfg.echo;
  Json rows = Json::array();
  for (const auto& run : runs) {
    const RunResult& r = *run.result;
    Json row;
    row["optimizer"] = run.optimizer;
    row["seed"] = run.seed;
    row["status"] = r.status == RunStatus::Completed ? "completed" : "numerical_abort";
    if (!r.abort_reason.empty()) row["abort_reason"] = r.abort_reason;
    row["iterations"] = r.iterations;
    row["nu"] = r.nu;
    row["total_ifo"] = r.total_ifo;
    row["gamma_used"] = r.gamma_used;
    row["final_loss"] = r.final_loss;
    if (r.final_g_norm) row["final_g_norm"] = *r.final_g_norm;
    if (!run.csv.empty()) row["csv"] = run.csv;
    rows.push_back(std::move(row));
  }
  summary["runs"] = std::move(rows);

  Json aggregates = Json::array();
  for (const auto& spec : cfg.optimizers) {
    std::vector<double> losses, g_norms;
    for (const auto& run : runs) {
      if (run.optimizer != spec.name || run.result->status != RunStatus::Completed) continue;
      losses.push_back(run.result->final_loss);
      if (run.result->final_g_norm) g_norms.push_back(*run.result->final_g_norm);
    }
    Json agg;
    agg["optimizer"] = spec.name;
    agg["completed"] = losses.size();
    if (!losses.empty()) agg["median_final_loss"] = median(losses);
    if (!g_norms.empty()) agg["median_final_g_norm"] = median(g_norms);
    aggregates.push_back(std::move(agg));
  }
  summary["aggregates"] = std::move(aggregates);
  return summary;
}

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const ProblemData& data,
                                        const std::filesystem::path& out_dir, std::uint64_t seed_offset = 0,
                                        int workers = 1) {
  std::filesystem::create_directories(out_dir);
  const int n = problem_num_samples(cfg, data);

  struct Job {
    const OptimizerSpec* spec;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& spec : cfg.optimizers)
    for (std::uint64_t seed : cfg.seeds) jobs.push_back({&spec, seed + seed_offset});

  ExperimentOutcome outcome;
  outcome.runs.resize(jobs.size());
  detail::parallel_for(static_cast<int>(jobs.size()), workers, [&](int j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    OptimizerConfig opt = materialize_optimizer(cfg, *job.spec, n);
    RunOutcome& slot = outcome.runs[static_cast<std::size_t>(j)];
    slot.optimizer = job.spec->name;
    slot.seed = job.seed;
    slot.result = run_single(cfg, data, opt, job.seed);
    slot.csv = job.spec->name + "_seed" + std::to_string(job.seed) + ".csv";
    write_trajectory_csv(out_dir / slot.csv, slot.result->records);
  });

  for (const auto& run : outcome.runs)
    if (run.result->status != RunStatus::Completed) outcome.any_abort = true;

  Json summary = summarize_runs(cfg, outcome.runs);
  outcome.summary_path = out_dir / "summary.json";
  std::ofstream out(outcome.summary_path, std::ios::binary);
  if (!out) throw format_error("cannot open '" + outcome.summary_path.string() + "' for writing");
  out << summary.dump(2) << '\n';
  return outcome;
}

struct GradCheckEntry {
  std::string label;
  GradientCheckReport report;
};

struct GradCheckSuiteReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
};

// Finite-difference validation of the configured problem's analytic gradients
// at a random feasible point: a spread of per-sample gradients plus the full
// gradient (finite-sum problems). Directions are random tangent vectors.
inline GradCheckSuiteReport run_gradient_check_suite(const ExperimentConfig& cfg, const ProblemData& data,
                                                     int samples = 5, int directions = 20,
                                                     std::uint64_t seed = 20240916) {
  if (samples < 1 || directions < 1) throw parameter_error("gradient check needs samples >= 1 and directions >= 1");
  GradCheckSuiteReport suite;
  Rng rng = make_stream(seed, SeedStream::Init);
  const int n = problem_num_samples(cfg, data);
  const int rows = problem_point_rows(cfg, data);
  StiefelPoint x = random_point(rows, cfg.rank, rng, problem_geometry(cfg));
  auto add = [&](std::string label, const GradientCheckReport& report) {
    suite.max_rel_err = std::max(suite.max_rel_err, report.max_rel_err);
    suite.entries.push_back({std::move(label), report});
  };

  if (cfg.kind == ProblemKind::SparsePca) {
    SparsePcaProblem problem(data.spca_data, cfg.mu, cfg.mode, cfg.gradient);
    for (int k = 0; k < samples; ++k) {
      int i = static_cast<int>((static_cast<long long>(k) * n) / samples);
      auto loss = [&](const Matrix& y) { return problem.smooth_sample_loss(y, i); };
      add("sample " + std::to_string(i),
          check_gradient(loss, problem.grad_sample_at(x.data(), i), x, directions, rng));
    }
    if (problem.supports_full_gradient()) {
      auto loss = [&](const Matrix& y) { return problem.smooth_loss_at(y); };
      add("full gradient", check_gradient(loss, problem.full_gradient(x), x, directions, rng));
    }
  } else {
    RobustMcProblem problem(data.rmc_rows, data.rmc_cols, data.omega, cfg.lambda, cfg.l1_weight);
    problem.prepare(x);
    for (int k = 0; k < samples; ++k) {
      int i = static_cast<int>((static_cast<long long>(k) * n) / samples);
      auto loss = [&](const Matrix& u) { return problem.sample_objective_at(u, i); };
      add("entry " + std::to_string(i), check_gradient(loss, problem.grad_sample(x, i), x, directions, rng));
    }
    auto loss = [&](const Matrix& u) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += problem.sample_objective_at(u, i);
      return acc / static_cast<double>(n);
    };
    add("full gradient", check_gradient(loss, problem.full_gradient(x), x, directions, rng));
  }
  return suite;
}

struct GridCell {
  double eta = 0.0;
  std::vector<double> final_losses;  // per seed, completed runs only
  int aborted = 0;
  std::optional<double> median_final_loss;
};

struct GridRow {
  std::string optimizer;
  std::vector<GridCell> cells;
  std::optional<double> best_eta;
  std::optional<double> best_median_loss;
};

struct GridOutcome {
  std::vector<GridRow> rows;
  std::filesystem::path grid_path;
};

// Sweep the step ladder for every configured optimizer and pick the eta with
// the best median final loss across seeds. Trajectories are not written; the
// sweep is a tuner, not an experiment record.
inline GridOutcome run_grid(const ExperimentConfig& cfg, const ProblemData& data,
                            const std::filesystem::path& out_dir, std::uint64_t seed_offset = 0, int workers = 1) {
  std::filesystem::create_directories(out_dir);
  const int n = problem_num_samples(cfg, data);
  const std::vector<double>& ladder = grid_eta_ladder();

  struct Job {
    std::size_t row;
    std::size_t cell;
    std::uint64_t seed;
    double eta;
  };
  GridOutcome outcome;
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.optimizers.size(); ++s) {
    GridRow row;
    row.optimizer = cfg.optimizers[s].name;
    for (std::size_t e = 0; e < ladder.size(); ++e) {
      GridCell cell;
      cell.eta = ladder[e];
      for (std::size_t k = 0; k < cfg.seeds.size(); ++k)
        jobs.push_back({s, e, cfg.seeds[k] + seed_offset, ladder[e]});
      row.cells.push_back(std::move(cell));
    }
    outcome.rows.push_back(std::move(row));
  }

  std::vector<RunStatus> statuses(jobs.size(), RunStatus::Completed);
  std::vector<double> losses(jobs.size(), std::numeric_limits<double>::quiet_NaN());
  detail::parallel_for(static_cast<int>(jobs.size()), workers, [&](int j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    OptimizerConfig opt = materialize_optimizer(cfg, cfg.optimizers[job.row], n);
    opt.eta = job.eta;
    opt.metric_every = 0;  // the sweep only compares final losses
    if (opt.algorithm == Algorithm::RProxSGD && opt.eta > 1.0) opt.eta = 1.0;  // ladder top, clamped to the valid range
    RunResult result = run_single(cfg, data, opt, job.seed);
    statuses[static_cast<std::size_t>(j)] = result.status;
    losses[static_cast<std::size_t>(j)] = result.final_loss;
  });

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    GridCell& cell = outcome.rows[jobs[j].row].cells[jobs[j].cell];
    if (statuses[j] == RunStatus::Completed && std::isfinite(losses[j])) cell.final_losses.push_back(losses[j]);
    else ++cell.aborted;
  }
  for (auto& row : outcome.rows) {
    for (auto& cell : row.cells) {
      if (!cell.final_losses.empty()) cell.median_final_loss = median(cell.final_losses);
      if (cell.median_final_loss &&
          (!row.best_median_loss || *cell.median_final_loss < *row.best_median_loss)) {
        row.best_median_loss = cell.median_final_loss;
        row.best_eta = cell.eta;
      }
    }
  }

  Json doc;
  doc["version"] = kVersion;
  doc["config"] = cfg.echo;
  doc["ladder"] = ladder;
  Json rows = Json::array();
  for (const auto& row : outcome.rows) {
    Json r;
    r["optimizer"] = row.optimizer;
    Json cells = Json::array();
    for (const auto& cell : row.cells) {
      Json c;
      c["eta"] = cell.eta;
      if (cell.median_final_loss) c["median_final_loss"] = *cell.median_final_loss;
      c["completed"] = cell.final_losses.size();
      if (cell.aborted > 0) c["aborted"] = cell.aborted;
      cells.push_back(std::move(c));
    }
    r["cells"] = std::move(cells);
    if (row.best_eta) r["best_eta"] = *row.best_eta;
    if (row.best_median_loss) r["best_median_loss"] = *row.best_median_loss;
    rows.push_back(std::move(r));
  }
  doc["optimizers"] = std::move(rows);
  outcome.grid_path = out_dir / "grid.json";
  std::ofstream out(outcome.grid_path, std::ios::binary);
  if (!out) throw format_error("cannot open '" + outcome.grid_path.string() + "' for writing");
  out << doc.dump(2) << '\n';
  return outcome;
}

}  // namespace rspg::io
