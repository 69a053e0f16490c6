#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "rspg/manifold.hpp"
#include "rspg/nonsmooth.hpp"
#include "rspg/rng.hpp"
#include "rspg/subproblem.hpp"
#include "rspg/validation/subproblem_oracle.hpp"

using namespace rspg;

TEST_CASE("h = 0 closed form, both geometries") {
  Rng rng(101);
  for (Geometry geometry : {Geometry::Stiefel, Geometry::Grassmann}) {
    StiefelPoint x = random_point(7, 3, rng, geometry);
    Matrix v = gaussian_matrix(7, 3, rng);
    double gamma = 0.37;
    SubproblemResult res = solve_subproblem(x, v, gamma, NonsmoothTerm::zero());
    Matrix expected = -gamma * project_tangent(x, v).data();
    REQUIRE((res.zeta.data() - expected).norm() <= 1e-12);
    REQUIRE(res.converged);
    REQUIRE(res.kkt_residual <= 1e-12);
    Matrix expected_dual =
        (geometry == Geometry::Stiefel) ? Matrix(sym(x.data().transpose() * v)) : Matrix(x.data().transpose() * v);
    REQUIRE((res.dual - expected_dual).norm() <= 1e-12);
  }
}

TEST_CASE("h = 0 solution is linear in v and in gamma") {
  Rng rng(103);
  StiefelPoint x = random_point(6, 2, rng);
  Matrix v = gaussian_matrix(6, 2, rng);
  NonsmoothTerm h = NonsmoothTerm::zero();
  Matrix z1 = solve_subproblem(x, v, 0.25, h).zeta.data();
  Matrix z2 = solve_subproblem(x, 3.0 * v, 0.25, h).zeta.data();
  Matrix z3 = solve_subproblem(x, v, 0.5, h).zeta.data();
  REQUIRE((z2 - 3.0 * z1).norm() <= 1e-13);
  REQUIRE((z3 - 2.0 * z1).norm() <= 1e-13);
}

TEST_CASE("zero-weight l1 reduces to the closed form") {
  Rng rng(107);
  StiefelPoint x = random_point(5, 2, rng);
  Matrix v = gaussian_matrix(5, 2, rng);
  SubproblemResult a = solve_subproblem(x, v, 0.4, NonsmoothTerm::l1(0.0));
  SubproblemResult b = solve_subproblem(x, v, 0.4, NonsmoothTerm::zero());
  REQUIRE((a.zeta.data() - b.zeta.data()).norm() == 0.0);
}

TEST_CASE("ssn agrees with the splitting oracle") {
  Rng rng(109);
  StiefelPoint x = random_point(6, 2, rng);
  Matrix v = gaussian_matrix(6, 2, rng);
  double gamma = 0.4, mu = 0.3;
  SubproblemOptions opts;
  opts.tol = 1e-9;
  SubproblemResult ssn = solve_subproblem(x, v, gamma, NonsmoothTerm::l1(mu), opts);
  OracleSolution oracle = oracle_solve_subproblem(x.data(), v, gamma, mu);
  REQUIRE(ssn.converged);
  REQUIRE(ssn.kkt_residual <= 1e-8);
  REQUIRE((ssn.zeta.data() - oracle.zeta).norm() <= 1e-6);
  // neither solver beats the other beyond roundoff
  double gap = subproblem_objective(x.data(), v, gamma, mu, ssn.zeta.data()) -
               subproblem_objective(x.data(), v, gamma, mu, oracle.zeta);
  REQUIRE(std::abs(gap) <= 1e-10);
}

TEST_CASE("solution survives random tangent perturbations") {
  Rng rng(113);
  StiefelPoint x = random_point(8, 3, rng);
  Matrix v = gaussian_matrix(8, 3, rng);
  double gamma = 0.5, mu = 0.2;
  SubproblemOptions opts;
  opts.tol = 1e-10;
  SubproblemResult res = solve_subproblem(x, v, gamma, NonsmoothTerm::l1(mu), opts);
  REQUIRE(res.converged);
  double at_solution = subproblem_objective(x.data(), v, gamma, mu, res.zeta.data());
  for (int k = 0; k < 50; ++k) {
    TangentVector delta = random_tangent(x, rng).scaled(1e-4);
    double perturbed = subproblem_objective(x.data(), v, gamma, mu, res.zeta.data() + delta.data());
    REQUIRE(perturbed >= at_solution - 1e-10);
  }
}

TEST_CASE("strong convexity gap against the zero candidate") {
  Rng rng(127);
  StiefelPoint x = random_point(7, 3, rng);
  Matrix v = gaussian_matrix(7, 3, rng);
  double gamma = 0.3, mu = 0.15;
  SubproblemResult res = solve_subproblem(x, v, gamma, NonsmoothTerm::l1(mu));
  double at_zero = subproblem_objective(x.data(), v, gamma, mu, Matrix::Zero(7, 3));
  double at_solution = subproblem_objective(x.data(), v, gamma, mu, res.zeta.data());
  REQUIRE(at_zero >= at_solution + res.zeta.data().squaredNorm() / (2.0 * gamma) - 1e-8);
}

TEST_CASE("solver output is deterministic") {
  Rng rng(131);
  StiefelPoint x = random_point(6, 3, rng);
  Matrix v = gaussian_matrix(6, 3, rng);
  SubproblemResult a = solve_subproblem(x, v, 0.4, NonsmoothTerm::l1(0.25));
  SubproblemResult b = solve_subproblem(x, v, 0.4, NonsmoothTerm::l1(0.25));
  REQUIRE(a.zeta.data() == b.zeta.data());
  REQUIRE(a.iterations == b.iterations);
}

TEST_CASE("argument validation") {
  Rng rng(137);
  StiefelPoint x = random_point(5, 2, rng);
  Matrix v = gaussian_matrix(5, 2, rng);
  REQUIRE_THROWS_AS(solve_subproblem(x, v, 0.0, NonsmoothTerm::zero()), parameter_error);
  REQUIRE_THROWS_AS(solve_subproblem(x, v, -1.0, NonsmoothTerm::zero()), parameter_error);
  REQUIRE_THROWS_AS(solve_subproblem(x, gaussian_matrix(4, 2, rng), 0.5, NonsmoothTerm::zero()), dimension_error);
  Matrix bad = v;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(solve_subproblem(x, bad, 0.5, NonsmoothTerm::zero()), numerical_error);
  REQUIRE_THROWS_AS(solve_subproblem(x, v, 0.5, NonsmoothTerm::masked_l1(0.1, Matrix::Ones(5, 2))), unsupported_error);
  StiefelPoint g = random_point(5, 2, rng, Geometry::Grassmann);
  REQUIRE_THROWS_AS(solve_subproblem(g, v, 0.5, NonsmoothTerm::l1(0.1)), unsupported_error);
}

TEST_CASE("non-convergence is soft") {
  Rng rng(139);
  StiefelPoint x = random_point(10, 4, rng);
  Matrix v = 50.0 * gaussian_matrix(10, 4, rng);
  SubproblemOptions opts;
  opts.max_iters = 1;
  opts.tol = 1e-15;  // unreachable in one iteration
  SubproblemResult res = solve_subproblem(x, v, 1.0, NonsmoothTerm::l1(0.5), opts);
  REQUIRE_FALSE(res.converged);
  REQUIRE(res.kkt_residual > 0.0);
  REQUIRE(res.zeta.data().allFinite());
  REQUIRE(res.zeta.base().same_point(x));
}

TEST_CASE("oracle tangent basis is orthonormal and complete") {
  Rng rng(149);
  StiefelPoint x = random_point(7, 3, rng);
  TangentBasis basis(x.data());
  Eigen::Index expected = 7 * 3 - 3 * 4 / 2;
  REQUIRE(basis.dimension() == expected);
  for (Eigen::Index i = 0; i < basis.dimension(); ++i)
    for (Eigen::Index j = i; j < basis.dimension(); ++j) {
      double ip = (basis.elements()[static_cast<std::size_t>(i)].array() *
                   basis.elements()[static_cast<std::size_t>(j)].array())
                      .sum();
      REQUIRE(ip == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-12));
    }

  // combine(coordinates(.)) reproduces tangent vectors and matches the
  // library projection on arbitrary ambient input
  TangentVector t = random_tangent(x, rng);
  REQUIRE((basis.combine(basis.coordinates(t.data())) - t.data()).norm() <= 1e-12);
  Matrix g = gaussian_matrix(7, 3, rng);
  Matrix via_basis = basis.combine(basis.coordinates(g));
  Matrix via_projection = project_tangent(x, g).data();
  REQUIRE((via_basis - via_projection).norm() <= 1e-11);

  // normal directions have zero coordinates
  Matrix s = sym(gaussian_matrix(3, 3, rng));
  REQUIRE(basis.coordinates(x.data() * s).norm() <= 1e-12);
}

TEST_CASE("oracle converges to a fixed point") {
  Rng rng(151);
  StiefelPoint x = random_point(6, 2, rng);
  Matrix v = gaussian_matrix(6, 2, rng);
  OracleSolution sol = oracle_solve_subproblem(x.data(), v, 0.8, 0.4);
  REQUIRE(sol.iterations < 100000);
  REQUIRE(sol.fixed_point_residual <= 1e-12);
  // the oracle's answer is tangent to working precision
  REQUIRE((x.data().transpose() * sol.zeta + sol.zeta.transpose() * x.data()).norm() <= 1e-12);
}
