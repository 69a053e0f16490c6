#pragma once

// Optimization drivers over one shared loop:
//
//   R-ProxSGD   minibatch mean gradient -> tangent subproblem -> Retr(eta_t zeta_t)
//   R-ProxSPB   recursive variance-reduced estimate (anchors every q), constant eta
//   ManPG       full gradient every iteration (finite-sum problems only)
//   R-Subgrad   Riemannian subgradient step xi_t = -Proj(batch mean subgradient)
//
// Iterates drift back to the constraint set through a periodic QR correction;
// the pre-correction drift is asserted against 1e-8 and any NaN/Inf in a
// loss or estimate aborts the run, preserving the records collected so far.
// The sampled output index nu ~ Uniform{1..T} comes from a dedicated RNG
// stream so metric cadence cannot perturb it.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/estimators.hpp"
#include "rspg/manifold.hpp"
#include "rspg/metrics.hpp"
#include "rspg/nonsmooth.hpp"
#include "rspg/rng.hpp"
#include "rspg/subproblem.hpp"

namespace rspg {

enum class Algorithm { RProxSGD, RProxSPB, ManPG, RSubgrad };
enum class StepSchedule { Constant, InverseSqrt };
enum class RunStatus { Completed, NumericalAbort };

inline constexpr double kAutoGamma = -1.0;
inline constexpr long long kNoBudget = -1;

// User-supplied smoothness estimates; never estimated on line.
struct SmoothnessEstimates {
  double L_tilde = 1.0;   // L_R / 2 + L_h M_2
  double c_E = 1.0;       // retraction second-order constant
  double Theta_sq = 1.0;  // squared transport/retraction compatibility bound

  void validate() const {
    if (!(L_tilde > 0.0) || !(c_E > 0.0) || !(Theta_sq > 0.0))
      throw parameter_error("SmoothnessEstimates must all be positive");
  }
};

// gamma = 2 eta / (2 L-tilde eta^2 + eta + 1); lands in (0, 2 eta).
inline double gamma_from_eta(double eta, const SmoothnessEstimates& est) {
  if (eta <= 0.0) throw parameter_error("gamma_from_eta requires eta > 0");
  est.validate();
  return 2.0 * eta / (2.0 * est.L_tilde * eta * eta + eta + 1.0);
}

// Constant step for the variance-reduced driver:
// eta = min(1 / (2 L-tilde), 1 / sqrt(2 c_E Theta^2)).
inline double eta_spb(const SmoothnessEstimates& est) {
  est.validate();
  return std::min(1.0 / (2.0 * est.L_tilde), 1.0 / std::sqrt(2.0 * est.c_E * est.Theta_sq));
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::RProxSGD;
  double eta = 0.1;  // constant step, or eta_0 for the inverse-sqrt schedule
  StepSchedule schedule = StepSchedule::Constant;
  double gamma = kAutoGamma;  // AUTO: formula above (SGD/ManPG) or 2/5 (SPB)
  BatchSpec batch{};
  long long max_iters = 100;
  long long ifo_budget = kNoBudget;  // stop on iterations or budget, whichever first
  RetractionKind retraction = RetractionKind::Polar;
  TransportKind transport = TransportKind::Projection;
  int reorthonormalize_every = 100;
  int metric_every = 1;  // cadence for est_err_sq / g_norm records; 0 disables
  bool record_wall_time = false;
  bool scaled_g_variant = false;  // gamma-scaled stationarity variant
  SmoothnessEstimates estimates{};

  void validate() const {
    if (!(eta > 0.0)) throw parameter_error("OptimizerConfig requires eta > 0");
    if (algorithm == Algorithm::RProxSGD && eta > 1.0)
      throw parameter_error("R-ProxSGD requires eta in (0, 1]");  // open interval in the chart, closed end allowed by the theory
    if (gamma != kAutoGamma && !(gamma > 0.0)) throw parameter_error("OptimizerConfig gamma must be > 0 or AUTO");
    if (max_iters < 1) throw parameter_error("OptimizerConfig requires max_iters >= 1");
    if (ifo_budget != kNoBudget && ifo_budget < 1) throw parameter_error("OptimizerConfig ifo_budget must be >= 1 or unset");
    if (reorthonormalize_every < 1) throw parameter_error("OptimizerConfig requires reorthonormalize_every >= 1");
    if (metric_every < 0) throw parameter_error("OptimizerConfig requires metric_every >= 0");
    estimates.validate();
  }

  double resolve_gamma() const {
    if (gamma != kAutoGamma) return gamma;
    switch (algorithm) {
      case Algorithm::RProxSPB:
        return 2.0 / 5.0;
      case Algorithm::RSubgrad:
        return 2.0 / 5.0;  // only consumed by the stationarity metric
      default:
        return gamma_from_eta(eta, estimates);
    }
  }

  double step_at(long long t) const {
    return (schedule == StepSchedule::Constant) ? eta : eta / std::sqrt(static_cast<double>(t + 1));
  }
};

// Batch shape used when a setup names only the algorithm. The variance-reduced
// driver anchors on the exact gradient every q = ceil(sqrt(n)) steps and runs
// recursion minibatches of the same size; the purely stochastic drivers draw
// single samples.
inline BatchSpec default_batch_for(Algorithm algorithm, int n) {
  if (n < 1) throw dimension_error("default_batch_for: dataset is empty");
  BatchSpec spec;
  if (algorithm == Algorithm::RProxSPB) {
    int q = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    spec.anchor = kBatchAll;
    spec.inner = q;
    spec.q = q;
  }
  return spec;
}

struct RunResult {
  StiefelPoint final_point;
  std::vector<IterationRecord> records;
  long long iterations = 0;
  long long nu = 0;  // sampled output index in {1..iterations}; 0 if no iteration ran
  long long total_ifo = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> final_g_norm;
  double gamma_used = 0.0;
  RunStatus status = RunStatus::Completed;
  std::string abort_reason;
};

// Snapshot handed to observers once per iteration, before the retraction.
struct IterationView {
  long long t;
  const StiefelPoint& point;
  const Matrix& estimate;        // v_t (or the mean subgradient for R-Subgrad)
  const TangentVector& direction;  // zeta_t (or xi_t)
};

struct NullObserver {
  void operator()(const IterationView&) {}
};

namespace detail {

template <class P>
concept HasPrepare = requires(P& p, const StiefelPoint& x) { p.prepare(x); };
template <class P>
concept HasPostStep = requires(P& p, const StiefelPoint& x) { p.post_step(x); };
template <class P>
concept HasSubgradient = requires(const P& p, const StiefelPoint& x) {
  { p.subgrad_sample(x, 0) } -> std::convertible_to<Matrix>;
};

}  // namespace detail

template <class Problem, class Observer = NullObserver>
RunResult run_optimizer(Problem& problem, const StiefelPoint& X0, const OptimizerConfig& cfg, std::uint64_t seed,
                        Observer&& observer = Observer{}) {
  cfg.validate();
  const int n = problem.num_samples();
  cfg.batch.validate(n);
  const bool finite_sum = problem.supports_full_gradient();
  if (cfg.algorithm == Algorithm::ManPG && !finite_sum)
    throw unsupported_error("ManPG requires full-gradient access (finite-sum problems only)");
  if constexpr (!detail::HasSubgradient<Problem>) {
    if (cfg.algorithm == Algorithm::RSubgrad)
      throw unsupported_error("R-Subgrad requires a per-sample Euclidean subgradient of the objective");
  }
  if constexpr (detail::HasPostStep<Problem>) {
    if (cfg.algorithm == Algorithm::RProxSPB)
      throw unsupported_error(
          "R-ProxSPB is not defined for problems with inner block updates: the recursion would evaluate "
          "the previous iterate against blocks that have moved since");
  }

  const double gamma = cfg.resolve_gamma();
  const NonsmoothTerm& h = problem.nonsmooth();
  const bool stochastic = cfg.algorithm == Algorithm::RProxSGD || cfg.algorithm == Algorithm::RProxSPB;

  Rng batch_rng = make_stream(seed, SeedStream::Batch);
  Rng nu_rng = make_stream(seed, SeedStream::OutputIndex);

  if constexpr (detail::HasPrepare<Problem>) problem.prepare(X0);

  RunResult result{X0, {}, 0, 0, 0, std::numeric_limits<double>::quiet_NaN(), std::nullopt, gamma,
                   RunStatus::Completed, {}};
  StiefelPoint X = X0;
  EstimatorState sarah_state;
  long long t = 0;

  while (t < cfg.max_iters && (cfg.ifo_budget == kNoBudget || result.total_ifo < cfg.ifo_budget)) {
    auto started = std::chrono::steady_clock::now();
    try {
      Matrix v;
      std::optional<TangentVector> direction;
      switch (cfg.algorithm) {
        case Algorithm::RProxSGD: {
          std::vector<int> batch = sample_batch(n, cfg.batch.inner, batch_rng);
          v = sgd_estimate(problem, X, batch, result.total_ifo);
          break;
        }
        case Algorithm::RProxSPB: {
          v = sarah_estimate(problem, X, sarah_state, cfg.batch, batch_rng, cfg.transport);
          result.total_ifo = sarah_state.ifo_count;
          break;
        }
        case Algorithm::ManPG: {
          v = problem.full_gradient(X);
          result.total_ifo += n;
          break;
        }
        case Algorithm::RSubgrad: {
          if constexpr (detail::HasSubgradient<Problem>) {
            std::vector<int> batch = sample_batch(n, cfg.batch.inner, batch_rng);
            Matrix acc = Matrix::Zero(X.rows(), X.cols());
            for (int i : batch) acc += problem.subgrad_sample(X, i);
            v = acc / static_cast<double>(batch.size());
            result.total_ifo += static_cast<long long>(batch.size());
            direction = project_tangent(X, v).scaled(-1.0);
          }
          break;
        }
      }
      if (!v.allFinite()) throw numerical_error("gradient estimate contains NaN/Inf");
      if (!direction.has_value()) direction = solve_subproblem(X, v, gamma, h).zeta;

      IterationRecord record;
      record.t = t;
      record.ifo = result.total_ifo;
      record.loss = problem.loss(X);
      if (!std::isfinite(record.loss)) throw numerical_error("objective value is NaN/Inf");
      record.zeta_norm = direction->norm();
      const bool cadence = cfg.metric_every > 0 && (t % cfg.metric_every == 0);
      if (cadence && finite_sum) {
        if (stochastic) record.est_err_sq = estimator_error_sq(v, problem.full_gradient(X));
        record.g_norm = stationarity_norm(problem, X, gamma, cfg.scaled_g_variant);
      }
      observer(IterationView{t, X, v, *direction});

      StiefelPoint X_next = retract(X, direction->scaled(cfg.step_at(t)), cfg.retraction);
      if ((t + 1) % cfg.reorthonormalize_every == 0) {
        double drift = X_next.orthonormality_drift();
        if (drift > 1e-8)
          throw numerical_error("orthonormality drift " + std::to_string(drift) + " exceeds 1e-8 before correction");
        X_next = reorthonormalize(X_next);
      }
      if constexpr (detail::HasPostStep<Problem>) problem.post_step(X_next);

      if (cfg.record_wall_time)
        record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      result.records.push_back(std::move(record));
      X = std::move(X_next);
      ++t;
    } catch (const numerical_error& err) {
      result.status = RunStatus::NumericalAbort;
      result.abort_reason = err.what();
      break;
    }
  }

  result.iterations = t;
  if (t >= 1) {
    std::uniform_int_distribution<long long> pick(1, t);
    result.nu = pick(nu_rng);
  }
  result.final_point = X;
  if (result.status == RunStatus::Completed) {
    try {
      double final_loss = problem.loss(X);
      if (!std::isfinite(final_loss)) throw numerical_error("objective value is NaN/Inf at the final iterate");
      result.final_loss = final_loss;
      if (finite_sum) result.final_g_norm = stationarity_norm(problem, X, gamma, cfg.scaled_g_variant);
      // Terminal row: the arrival point of the last step. No step is computed
      // here, so zeta_norm stays empty; the loss and G values are the ones the
      // run summary reports, which keeps file-level aggregation consistent.
      IterationRecord terminal;
      terminal.t = t;
      terminal.ifo = result.total_ifo;
      terminal.loss = result.final_loss;
      terminal.g_norm = result.final_g_norm;
      result.records.push_back(std::move(terminal));
    } catch (const numerical_error& err) {
      result.status = RunStatus::NumericalAbort;
      result.abort_reason = err.what();
    }
  }
  if (result.status != RunStatus::Completed && !result.records.empty() && !std::isfinite(result.final_loss))
    result.final_loss = result.records.back().loss;
  return result;
}

// Named entry points; each pins the algorithm tag and defers to the shared loop.
template <class Problem, class Observer = NullObserver>
RunResult run_r_prox_sgd(Problem& p, const StiefelPoint& X0, OptimizerConfig cfg, std::uint64_t seed,
                         Observer&& obs = Observer{}) {
  cfg.algorithm = Algorithm::RProxSGD;
  return run_optimizer(p, X0, cfg, seed, std::forward<Observer>(obs));
}
template <class Problem, class Observer = NullObserver>
RunResult run_r_prox_spb(Problem& p, const StiefelPoint& X0, OptimizerConfig cfg, std::uint64_t seed,
                         Observer&& obs = Observer{}) {
  cfg.algorithm = Algorithm::RProxSPB;
  return run_optimizer(p, X0, cfg, seed, std::forward<Observer>(obs));
}
template <class Problem, class Observer = NullObserver>
RunResult run_manpg(Problem& p, const StiefelPoint& X0, OptimizerConfig cfg, std::uint64_t seed,
                    Observer&& obs = Observer{}) {
  cfg.algorithm = Algorithm::ManPG;
  return run_optimizer(p, X0, cfg, seed, std::forward<Observer>(obs));
}
template <class Problem, class Observer = NullObserver>
RunResult run_r_subgrad(Problem& p, const StiefelPoint& X0, OptimizerConfig cfg, std::uint64_t seed,
                        Observer&& obs = Observer{}) {
  cfg.algorithm = Algorithm::RSubgrad;
  return run_optimizer(p, X0, cfg, seed, std::forward<Observer>(obs));
}

}  // namespace rspg
