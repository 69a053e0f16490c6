#pragma once

// Seeded cross-check suite: the production tangent subproblem solver against
// the independent splitting-based oracle on a family of small instances, plus
// the closed-form h = 0 identity. The suite is the single source of truth for
// both the command line `prox-oracle` report and the test gate.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rspg/manifold.hpp"
#include "rspg/nonsmooth.hpp"
#include "rspg/rng.hpp"
#include "rspg/subproblem.hpp"
#include "rspg/validation/subproblem_oracle.hpp"

namespace rspg::validation {

struct OracleCase {
  int d = 0;
  int r = 0;
  double gamma = 0.0;
  double mu = 0.0;
  double zeta_gap = 0.0;        // ||zeta_ssn - zeta_oracle||_F
  double kkt_residual = 0.0;    // solver-reported KKT residual
  double objective_gap = 0.0;   // phi(zeta_ssn) - phi(zeta_oracle); negative favors the solver
  double zero_form_gap = 0.0;   // mu = 0 only: distance to -gamma Proj(v)
};

struct OracleSuiteReport {
  std::vector<OracleCase> cases;
  double max_zeta_gap = 0.0;
  double max_kkt_residual = 0.0;
  double max_objective_excess = 0.0;  // max(0, objective_gap) over cases
  double max_zero_form_gap = 0.0;
};

// `instances` base points/gradients, each solved over a small grid of
// (gamma, mu) pairs. Dimensions cycle through d in 4..8, r in 1..3.
inline OracleSuiteReport run_oracle_suite(int instances = 100, std::uint64_t seed = 20240915) {
  const std::vector<double> gammas = {0.1, 0.4, 1.0};
  const std::vector<double> mus = {0.0, 0.1, 0.5};
  OracleSuiteReport report;
  for (int k = 0; k < instances; ++k) {
    Rng rng(rspg::detail::splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k + 1))));
    const int d = 4 + (k % 5);
    const int r = 1 + (k % 3);
    StiefelPoint x = random_point(d, r, rng);
    Matrix v = gaussian_matrix(d, r, rng);
    for (double gamma : gammas) {
      for (double mu : mus) {
        SubproblemOptions opts;
        opts.tol = 1e-9;
        NonsmoothTerm h = mu == 0.0 ? NonsmoothTerm::zero() : NonsmoothTerm::l1(mu);
        SubproblemResult ssn = solve_subproblem(x, v, gamma, h, opts);
        OracleSolution oracle = oracle_solve_subproblem(x.data(), v, gamma, mu);

        OracleCase c;
        c.d = d;
        c.r = r;
        c.gamma = gamma;
        c.mu = mu;
        c.zeta_gap = (ssn.zeta.data() - oracle.zeta).norm();
        c.kkt_residual = ssn.kkt_residual;
        c.objective_gap = subproblem_objective(x.data(), v, gamma, mu, ssn.zeta.data()) -
                          subproblem_objective(x.data(), v, gamma, mu, oracle.zeta);
        if (mu == 0.0) {
          Matrix closed = -gamma * project_tangent(x, v).data();
          c.zero_form_gap = (ssn.zeta.data() - closed).norm();
          report.max_zero_form_gap = std::max(report.max_zero_form_gap, c.zero_form_gap);
        }
        report.max_zeta_gap = std::max(report.max_zeta_gap, c.zeta_gap);
        report.max_kkt_residual = std::max(report.max_kkt_residual, c.kkt_residual);
        report.max_objective_excess = std::max(report.max_objective_excess, c.objective_gap);
        report.cases.push_back(c);
      }
    }
  }
  return report;
}

}  // namespace rspg::validation
