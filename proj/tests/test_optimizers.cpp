#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rspg/estimators.hpp"
#include "rspg/manifold.hpp"
#include "rspg/optimizers.hpp"
#include "rspg/problems/robust_mc.hpp"
#include "rspg/problems/sparse_pca.hpp"
#include "rspg/rng.hpp"

using namespace rspg;

namespace {

SparsePcaProblem make_spca(int n, int d, std::uint64_t seed, double mu = 0.1,
                           SpcaMode mode = SpcaMode::FiniteSum) {
  Rng rng(seed);
  return SparsePcaProblem(gaussian_matrix(n, d, rng), mu, mode);
}

RobustMcProblem make_rmc(std::uint64_t seed) {
  const int m = 8, n = 6, r = 2;
  Rng rng(seed);
  Matrix truth = gaussian_matrix(m, r, rng) * gaussian_matrix(r, n, rng);
  std::vector<ObservedEntry> omega;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if ((i + j) % 2 == 0) omega.push_back({i, j, truth(i, j)});
  return RobustMcProblem(m, n, omega, 0.1, 0.05);
}

// Problem whose per-sample gradients turn non-finite after a set number of
// oracle calls; exercises the abort path without depending on overflow.
struct PoisonedProblem {
  int poison_after = 3;
  mutable int calls = 0;
  NonsmoothTerm h = NonsmoothTerm::zero();

  int num_samples() const { return 4; }
  bool supports_full_gradient() const { return false; }
  const NonsmoothTerm& nonsmooth() const { return h; }
  double loss(const StiefelPoint&) const { return 1.0; }
  Matrix grad_sample(const StiefelPoint& X, int) const {
    ++calls;
    Matrix g = Matrix::Constant(X.rows(), X.cols(), 0.01);
    if (calls > poison_after) g(0, 0) = std::numeric_limits<double>::quiet_NaN();
    return g;
  }
  Matrix full_gradient(const StiefelPoint&) const {
    throw unsupported_error("poisoned problem has no full gradient");
  }
};

bool records_equal(const IterationRecord& a, const IterationRecord& b) {
  return a.t == b.t && a.ifo == b.ifo && a.loss == b.loss && a.zeta_norm == b.zeta_norm &&
         a.est_err_sq == b.est_err_sq && a.g_norm == b.g_norm;
}

}  // namespace

TEST_CASE("step-size coupling formulas at hand-checked values") {
  SmoothnessEstimates est;  // L_tilde = c_E = Theta_sq = 1
  SECTION("gamma from eta") {
    // 2*0.5 / (2*0.25 + 0.5 + 1) = 1 / 2
    REQUIRE(gamma_from_eta(0.5, est) == Catch::Approx(0.5).margin(1e-15));
    // eta = 1: 2 / (2 + 1 + 1) = 1/2
    REQUIRE(gamma_from_eta(1.0, est) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE_THROWS_AS(gamma_from_eta(0.0, est), parameter_error);
  }
  SECTION("constant step for the variance-reduced driver") {
    SmoothnessEstimates tuned;
    tuned.L_tilde = 1.0;
    tuned.c_E = 1.0;
    tuned.Theta_sq = 0.125;  // min(1/2, 1/sqrt(1/4)) = min(0.5, 2)
    REQUIRE(eta_spb(tuned) == Catch::Approx(0.5).margin(1e-15));
    tuned.Theta_sq = 8.0;  // min(0.5, 1/4) = 0.25
    REQUIRE(eta_spb(tuned) == Catch::Approx(0.25).margin(1e-15));
  }
  SECTION("the coupled gamma always lands in (0, 2 eta)") {
    Rng rng(17);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int k = 0; k < 200; ++k) {
      double eta = unif(rng);
      SmoothnessEstimates e;
      e.L_tilde = 4.0 * unif(rng);
      double gamma = gamma_from_eta(eta, e);
      REQUIRE(gamma > 0.0);
      REQUIRE(gamma < 2.0 * eta);
    }
  }
  SECTION("positivity validation") {
    SmoothnessEstimates bad;
    bad.L_tilde = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), parameter_error);
  }
}

TEST_CASE("auto gamma resolves per algorithm") {
  OptimizerConfig cfg;
  cfg.eta = 0.3;
  cfg.algorithm = Algorithm::RProxSGD;
  REQUIRE(cfg.resolve_gamma() == gamma_from_eta(0.3, cfg.estimates));
  cfg.algorithm = Algorithm::ManPG;
  REQUIRE(cfg.resolve_gamma() == gamma_from_eta(0.3, cfg.estimates));
  cfg.algorithm = Algorithm::RProxSPB;
  REQUIRE(cfg.resolve_gamma() == 0.4);
  cfg.algorithm = Algorithm::RSubgrad;
  REQUIRE(cfg.resolve_gamma() == 0.4);
  cfg.gamma = 0.7;  // explicit value wins everywhere
  REQUIRE(cfg.resolve_gamma() == 0.7);
}

TEST_CASE("config validation") {
  OptimizerConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  SECTION("eta range") {
    cfg.eta = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
    cfg.eta = 1.5;  // outside (0, 1] for the stochastic proximal driver
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
    cfg.algorithm = Algorithm::RSubgrad;  // no such cap elsewhere
    REQUIRE_NOTHROW(cfg.validate());
  }
  SECTION("gamma") {
    cfg.gamma = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
    cfg.gamma = -0.5;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
  }
  SECTION("counters") {
    cfg.max_iters = 0;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
    cfg.max_iters = 10;
    cfg.ifo_budget = 0;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
    cfg.ifo_budget = kNoBudget;
    cfg.reorthonormalize_every = 0;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
    cfg.reorthonormalize_every = 1;
    cfg.metric_every = -1;
    REQUIRE_THROWS_AS(cfg.validate(), parameter_error);
  }
}

TEST_CASE("inverse-sqrt schedule divides by sqrt(t+1)") {
  OptimizerConfig cfg;
  cfg.eta = 0.2;
  cfg.schedule = StepSchedule::InverseSqrt;
  REQUIRE(cfg.step_at(0) == Catch::Approx(0.2).margin(1e-15));
  REQUIRE(cfg.step_at(1) == Catch::Approx(0.2 / std::sqrt(2.0)).margin(1e-15));
  REQUIRE(cfg.step_at(3) == Catch::Approx(0.1).margin(1e-15));
  cfg.schedule = StepSchedule::Constant;
  REQUIRE(cfg.step_at(5) == 0.2);
}

TEST_CASE("default batch shapes") {
  BatchSpec spb = default_batch_for(Algorithm::RProxSPB, 500);
  REQUIRE(spb.anchor == kBatchAll);
  REQUIRE(spb.q == 23);  // ceil(sqrt(500))
  REQUIRE(spb.inner == 23);
  REQUIRE(default_batch_for(Algorithm::RProxSPB, 484).q == 22);  // exact square
  BatchSpec sgd = default_batch_for(Algorithm::RProxSGD, 500);
  REQUIRE(sgd.anchor == kBatchAll);
  REQUIRE(sgd.inner == 1);
  REQUIRE(sgd.q == 1);
  REQUIRE_THROWS_AS(default_batch_for(Algorithm::RProxSGD, 0), dimension_error);
}

TEST_CASE("variance-reduced driver with q=1 full anchors walks the ManPG path") {
  auto problem = make_spca(14, 7, 1001, 0.15);
  Rng init(21);
  StiefelPoint x0 = random_point(7, 2, init);

  OptimizerConfig manpg;
  manpg.eta = 0.4;
  manpg.gamma = 0.3;
  manpg.max_iters = 12;
  OptimizerConfig spb = manpg;
  spb.batch.anchor = kBatchAll;
  spb.batch.q = 1;

  RunResult a = run_manpg(problem, x0, manpg, 5);
  RunResult b = run_r_prox_spb(problem, x0, spb, 5);

  REQUIRE(a.iterations == b.iterations);
  REQUIRE((a.final_point.data() - b.final_point.data()).norm() == 0.0);
  REQUIRE(a.final_loss == b.final_loss);
  REQUIRE(a.total_ifo == b.total_ifo);
  REQUIRE(a.nu == b.nu);
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    REQUIRE(a.records[t].t == b.records[t].t);
    REQUIRE(a.records[t].ifo == b.records[t].ifo);
    REQUIRE(a.records[t].loss == b.records[t].loss);
    REQUIRE(a.records[t].zeta_norm == b.records[t].zeta_norm);
    REQUIRE(a.records[t].g_norm == b.records[t].g_norm);
    if (t + 1 == a.records.size()) continue;  // terminal row: no estimate is drawn
    // every step is an exact anchor, so the estimator error is exactly zero
    REQUIRE(b.records[t].est_err_sq.has_value());
    REQUIRE(*b.records[t].est_err_sq == 0.0);
    REQUIRE(!a.records[t].est_err_sq.has_value());
  }
}

TEST_CASE("a single-sample dataset makes the stochastic driver deterministic") {
  auto problem = make_spca(1, 6, 1002, 0.1);
  Rng init(22);
  StiefelPoint x0 = random_point(6, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.gamma = 0.35;
  cfg.max_iters = 10;

  RunResult sgd = run_r_prox_sgd(problem, x0, cfg, 9);
  RunResult manpg = run_manpg(problem, x0, cfg, 9);
  REQUIRE((sgd.final_point.data() - manpg.final_point.data()).norm() == 0.0);
  REQUIRE(sgd.total_ifo == manpg.total_ifo);
  for (std::size_t t = 0; t < sgd.records.size(); ++t) {
    REQUIRE(sgd.records[t].loss == manpg.records[t].loss);
    REQUIRE(sgd.records[t].zeta_norm == manpg.records[t].zeta_norm);
  }
}

TEST_CASE("smooth-only direction is the scaled projected estimate") {
  auto problem = make_spca(12, 6, 1003, 0.0);  // mu = 0: no nonsmooth term
  Rng init(23);
  StiefelPoint x0 = random_point(6, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.3;
  cfg.gamma = 0.25;
  cfg.max_iters = 6;
  cfg.batch.q = 3;
  cfg.batch.inner = 2;

  struct Check {
    double gamma;
    double worst = 0.0;
    void operator()(const IterationView& view) {
      Matrix expected = -gamma * project_tangent(view.point, view.estimate).data();
      worst = std::max(worst, (view.direction.data() - expected).norm());
    }
  } check{cfg.gamma};

  run_r_prox_spb(problem, x0, cfg, 31, check);
  REQUIRE(check.worst <= 1e-12);
}

TEST_CASE("sampled output index is uniform over the horizon") {
  auto problem = make_spca(2, 4, 1004, 0.0);
  Rng init(24);
  StiefelPoint x0 = random_point(4, 1, init);

  OptimizerConfig cfg;
  cfg.eta = 0.1;
  cfg.gamma = 0.4;
  cfg.max_iters = 20;
  cfg.metric_every = 0;

  const int draws = 10000;
  std::vector<long long> counts(20, 0);
  for (int seed = 0; seed < draws; ++seed) {
    RunResult r = run_r_prox_sgd(problem, x0, cfg, static_cast<std::uint64_t>(seed));
    REQUIRE(r.nu >= 1);
    REQUIRE(r.nu <= 20);
    counts[static_cast<std::size_t>(r.nu - 1)]++;
  }
  double expected = draws / 20.0;
  double chi_sq = 0.0;
  for (long long c : counts) chi_sq += (c - expected) * (c - expected) / expected;
  REQUIRE(chi_sq < 36.191);  // dof 19 at the 1% level
}

TEST_CASE("output index stream is independent of metric cadence") {
  auto problem = make_spca(8, 5, 1005, 0.1);
  Rng init(25);
  StiefelPoint x0 = random_point(5, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.2;
  cfg.max_iters = 9;
  RunResult dense = run_manpg(problem, x0, cfg, 77);
  cfg.metric_every = 4;
  RunResult sparse_cadence = run_manpg(problem, x0, cfg, 77);
  REQUIRE(dense.nu == sparse_cadence.nu);
  REQUIRE((dense.final_point.data() - sparse_cadence.final_point.data()).norm() == 0.0);
  // cadence only thins the optional metrics; the terminal row always carries
  // the final stationarity value
  for (std::size_t t = 0; t < dense.records.size(); ++t) {
    REQUIRE(dense.records[t].g_norm.has_value());
    bool expect = (t % 4 == 0) || (t + 1 == sparse_cadence.records.size());
    REQUIRE(sparse_cadence.records[t].g_norm.has_value() == expect);
  }
}

TEST_CASE("records carry nondecreasing oracle counts and finite losses") {
  auto problem = make_spca(20, 6, 1006, 0.2);
  Rng init(26);
  StiefelPoint x0 = random_point(6, 3, init);

  OptimizerConfig cfg;
  cfg.eta = 0.3;
  cfg.max_iters = 15;
  cfg.batch.q = 4;
  cfg.batch.inner = 3;
  RunResult r = run_r_prox_spb(problem, x0, cfg, 13);
  REQUIRE(r.status == RunStatus::Completed);
  REQUIRE(r.records.size() == 16);  // 15 steps plus the terminal row
  long long prev = 0;
  for (std::size_t k = 0; k < r.records.size(); ++k) {
    const auto& rec = r.records[k];
    REQUIRE(rec.ifo >= prev);
    prev = rec.ifo;
    REQUIRE(std::isfinite(rec.loss));
    if (k + 1 < r.records.size()) {
      REQUIRE(rec.zeta_norm.has_value());
      REQUIRE(*rec.zeta_norm >= 0.0);
    } else {
      REQUIRE(!rec.zeta_norm.has_value());
      REQUIRE(rec.loss == r.final_loss);
    }
  }
  REQUIRE(r.total_ifo == r.records.back().ifo);
  REQUIRE(std::isfinite(r.final_loss));
  REQUIRE(r.final_g_norm.has_value());
}

TEST_CASE("runs are reproducible by seed") {
  auto problem = make_spca(16, 6, 1007, 0.1);
  Rng init(27);
  StiefelPoint x0 = random_point(6, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.4;
  cfg.max_iters = 8;
  cfg.batch.inner = 2;
  RunResult a = run_r_prox_sgd(problem, x0, cfg, 101);
  RunResult b = run_r_prox_sgd(problem, x0, cfg, 101);
  RunResult c = run_r_prox_sgd(problem, x0, cfg, 102);
  REQUIRE((a.final_point.data() - b.final_point.data()).norm() == 0.0);
  REQUIRE(a.nu == b.nu);
  for (std::size_t t = 0; t < a.records.size(); ++t) REQUIRE(records_equal(a.records[t], b.records[t]));
  REQUIRE((a.final_point.data() - c.final_point.data()).norm() > 0.0);
}

TEST_CASE("the oracle budget stops the loop") {
  auto problem = make_spca(10, 5, 1008, 0.1);
  Rng init(28);
  StiefelPoint x0 = random_point(5, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.3;
  cfg.max_iters = 100;
  cfg.ifo_budget = 35;  // four full gradients of 10 samples each overshoot it
  RunResult r = run_manpg(problem, x0, cfg, 5);
  REQUIRE(r.iterations == 4);
  REQUIRE(r.total_ifo == 40);
}

TEST_CASE("non-finite estimates abort and keep the trajectory so far") {
  PoisonedProblem problem;
  Rng init(29);
  StiefelPoint x0 = random_point(5, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.2;
  cfg.gamma = 0.3;
  cfg.max_iters = 50;
  RunResult r = run_r_prox_sgd(problem, x0, cfg, 3);
  REQUIRE(r.status == RunStatus::NumericalAbort);
  REQUIRE(r.iterations == 3);
  REQUIRE(r.records.size() == 3);
  REQUIRE(r.abort_reason.find("NaN") != std::string::npos);
  REQUIRE(r.nu >= 1);
  REQUIRE(r.nu <= 3);
  REQUIRE(r.final_loss == r.records.back().loss);
  REQUIRE(!r.final_g_norm.has_value());
}

TEST_CASE("periodic reorthonormalization keeps iterates feasible on long runs") {
  auto problem = make_spca(12, 6, 1009, 0.1);
  Rng init(30);
  StiefelPoint x0 = random_point(6, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.5;
  cfg.max_iters = 60;
  cfg.reorthonormalize_every = 5;
  RunResult r = run_r_prox_sgd(problem, x0, cfg, 41);
  REQUIRE(r.status == RunStatus::Completed);
  REQUIRE(r.final_point.orthonormality_drift() <= 1e-10);
}

TEST_CASE("capability guards") {
  Rng init(31);
  SECTION("full-gradient driver refuses online problems") {
    auto online = make_spca(10, 5, 1010, 0.1, SpcaMode::Online);
    StiefelPoint x0 = random_point(5, 2, init);
    OptimizerConfig cfg;
    REQUIRE_THROWS_AS(run_manpg(online, x0, cfg, 1), unsupported_error);
  }
  SECTION("subgradient driver needs a subgradient oracle") {
    auto rmc = make_rmc(1011);
    StiefelPoint u0 = random_point(8, 2, init, Geometry::Grassmann);
    OptimizerConfig cfg;
    REQUIRE_THROWS_AS(run_r_subgrad(rmc, u0, cfg, 1), unsupported_error);
  }
  SECTION("variance reduction refuses problems with inner block updates") {
    auto rmc = make_rmc(1012);
    StiefelPoint u0 = random_point(8, 2, init, Geometry::Grassmann);
    OptimizerConfig cfg;
    REQUIRE_THROWS_AS(run_r_prox_spb(rmc, u0, cfg, 1), unsupported_error);
  }
}

TEST_CASE("subgradient steps move along the projected negative subgradient") {
  auto problem = make_spca(10, 6, 1013, 0.3);
  Rng init(32);
  StiefelPoint x0 = random_point(6, 2, init);

  OptimizerConfig cfg;
  cfg.eta = 0.1;
  cfg.schedule = StepSchedule::InverseSqrt;
  cfg.max_iters = 5;
  cfg.batch.inner = 4;

  struct Check {
    double worst = 0.0;
    void operator()(const IterationView& view) {
      Matrix expected = -project_tangent(view.point, view.estimate).data();
      worst = std::max(worst, (view.direction.data() - expected).norm());
    }
  } check;
  RunResult r = run_r_subgrad(problem, x0, cfg, 21, check);
  REQUIRE(check.worst == 0.0);
  REQUIRE(r.status == RunStatus::Completed);
  // loss excludes no term: the subgradient driver reports the full objective
  for (const auto& rec : r.records) REQUIRE(std::isfinite(rec.loss));
}
