#pragma once

// Tangent-space proximal subproblem
//
//   min_{zeta in T_X}  <v, zeta> + (1/(2 gamma)) ||zeta||_F^2 + h(X + zeta)
//
// h = Zero has the closed form zeta = -gamma Proj_X(v) (both geometries).
// h = mu ||.||_1 on the Stiefel geometry is solved by a semi-smooth Newton
// method on the dual: zeta(L) = prox_{gamma mu}(X - gamma (v - X L)) - X for
// symmetric L, driving the tangency residual E(L) = zeta(L)^T X + X^T zeta(L)
// to zero. The generalized-Jacobian system is solved by conjugate gradient on
// the symmetric matrix space, globalized by a backtracking line search on
// ||E||_F^2 with a gradient-step fallback. Non-convergence is soft: the best
// iterate is returned with `converged = false`.

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "rspg/errors.hpp"
#include "rspg/manifold.hpp"
#include "rspg/nonsmooth.hpp"

namespace rspg {

struct SubproblemOptions {
  double tol = -1.0;    // <= 0 resolves to 1e-8 * max(1, ||v||_F)
  int max_iters = 100;  // outer semi-smooth Newton iterations
};

struct SubproblemResult {
  TangentVector zeta;
  Matrix dual;  // multiplier L at the returned iterate
  int iterations = 0;
  int inner_cg_iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

namespace detail {

// J(S) = gamma * ((D o (X S))^T X + X^T (D o (X S))), the generalized
// Jacobian of E at the current active mask D; self-adjoint and PSD on the
// symmetric matrices under the Frobenius inner product.
inline Matrix apply_ssn_jacobian(const Matrix& x, const Eigen::ArrayXXd& active, double gamma, const Matrix& s) {
  Matrix xs = (active * (x * s).array()).matrix();
  Matrix a = xs.transpose() * x;
  return gamma * (a + a.transpose());
}

// Conjugate gradient for J dL = rhs, capped iterations, relative residual
// tolerance `forcing`. Returns the final iterate even on cap/breakdown.
inline Matrix ssn_cg(const Matrix& x, const Eigen::ArrayXXd& active, double gamma, const Matrix& rhs, double forcing,
                     int cap, int& iters_used) {
  Matrix dl = Matrix::Zero(rhs.rows(), rhs.cols());
  Matrix res = rhs;
  Matrix p = res;
  double rho = res.squaredNorm();
  const double target = forcing * std::sqrt(rho);
  iters_used = 0;
  if (std::sqrt(rho) == 0.0) return dl;
  for (int k = 0; k < cap; ++k) {
    Matrix jp = apply_ssn_jacobian(x, active, gamma, p);
    double pjp = (p.array() * jp.array()).sum();
    if (pjp <= 0.0 || !std::isfinite(pjp)) break;  // singular direction: stop with current iterate
    double alpha = rho / pjp;
    dl += alpha * p;
    res -= alpha * jp;
    ++iters_used;
    double rho_next = res.squaredNorm();
    if (std::sqrt(rho_next) <= target) break;
    p = res + (rho_next / rho) * p;
    rho = rho_next;
  }
  return dl;
}

}  // namespace detail

inline SubproblemResult solve_subproblem(const StiefelPoint& X, const Matrix& v, double gamma, const NonsmoothTerm& h,
                                         SubproblemOptions opts = {}) {
  if (gamma <= 0.0) throw parameter_error("solve_subproblem requires gamma > 0");
  if (v.rows() != X.rows() || v.cols() != X.cols()) throw dimension_error("solve_subproblem: v shape mismatch");
  if (!v.allFinite()) throw numerical_error("solve_subproblem: v contains NaN/Inf");
  if (opts.max_iters < 1) throw parameter_error("solve_subproblem requires max_iters >= 1");
  const double tol = (opts.tol > 0.0) ? opts.tol : 1e-8 * std::max(1.0, v.norm());

  const Matrix& x = X.data();

  if (h.kind() == NonsmoothKind::Zero || (h.kind() == NonsmoothKind::L1 && h.weight() == 0.0)) {
    TangentVector zeta = project_tangent(X, v).scaled(-gamma);
    SubproblemResult result{zeta,
                            (X.geometry() == Geometry::Stiefel) ? Matrix(sym(x.transpose() * v)) : Matrix(x.transpose() * v),
                            0,
                            0,
                            0.0,
                            true};
    // Consistency residual of the projected optimality condition.
    result.kkt_residual = (project_tangent(X, v).data() + zeta.data() / gamma).norm();
    result.converged = result.kkt_residual <= tol;
    return result;
  }

  if (h.kind() == NonsmoothKind::MaskedL1)
    throw unsupported_error("tangent subproblem supports Zero and L1 terms only (MaskedL1 is a Euclidean-block prox)");
  if (X.geometry() != Geometry::Stiefel)
    throw unsupported_error("l1 tangent subproblem is implemented for the Stiefel geometry only");

  const double mu = h.weight();
  const Eigen::Index r = x.cols();
  const Matrix b = x - gamma * v;

  struct Eval {
    Matrix prox_input;
    Matrix y;
    Matrix zeta_raw;
    Matrix e;
    double psi;  // 0.5 ||E||^2
  };
  auto evaluate = [&](const Matrix& lambda) {
    Eval ev;
    ev.prox_input = b + gamma * (x * lambda);
    ev.y = prox_l1(ev.prox_input, gamma * mu);
    ev.zeta_raw = ev.y - x;
    Matrix a = ev.zeta_raw.transpose() * x;
    ev.e = a + a.transpose();
    ev.psi = 0.5 * ev.e.squaredNorm();
    return ev;
  };
  // KKT residual at a dual iterate: tangency violation plus the projected
  // optimality residual measured with the prox-selected subgradient.
  auto kkt_of = [&](const Eval& ev, const Matrix& zeta_proj) {
    Matrix s = (ev.prox_input - ev.y) / gamma;
    double viol = (project_tangent(X, v + s).data() + zeta_proj / gamma).norm();
    return ev.e.norm() + viol;
  };

  Matrix lambda = Matrix::Zero(r, r);
  Eval ev = evaluate(lambda);
  Matrix best_lambda = lambda;
  double best_kkt = kkt_of(ev, project_tangent(X, ev.zeta_raw).data());
  int total_cg = 0;
  int iterations = 0;
  int stalls = 0;

  for (; iterations < opts.max_iters; ++iterations) {
    double e_norm = ev.e.norm();
    if (best_kkt <= tol) break;

    Eigen::ArrayXXd active = (ev.prox_input.array().abs() >= gamma * mu).cast<double>();  // ties -> 1
    int cg_used = 0;
    Matrix direction = detail::ssn_cg(x, active, gamma, Matrix(-ev.e), std::min(0.1, e_norm), 100, cg_used);
    total_cg += cg_used;

    Matrix grad_psi = detail::apply_ssn_jacobian(x, active, gamma, ev.e);
    double slope = (grad_psi.array() * direction.array()).sum();
    if (!(slope < 0.0)) {  // Newton direction failed: gradient step on ||E||^2
      direction = -grad_psi;
      slope = -grad_psi.squaredNorm();
    }
    if (!(slope < 0.0)) {  // degenerate saturated Jacobian: push along -E
      direction = -ev.e;
      slope = 0.0;
    }

    double step = 1.0;
    bool accepted = false;
    Eval trial;
    for (int ls = 0; ls < 30; ++ls) {
      trial = evaluate(lambda + step * direction);
      if (trial.psi <= ev.psi + 1e-4 * step * slope && trial.psi < ev.psi) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (++stalls >= 2) break;  // soft failure: keep best iterate
      continue;
    }
    stalls = 0;
    lambda += step * direction;
    ev = trial;
    double kkt = kkt_of(ev, project_tangent(X, ev.zeta_raw).data());
    if (kkt < best_kkt) {
      best_kkt = kkt;
      best_lambda = lambda;
    }
  }

  Eval best_ev = evaluate(best_lambda);
  TangentVector zeta = project_tangent(X, best_ev.zeta_raw);
  double kkt = kkt_of(best_ev, zeta.data());
  SubproblemResult result{std::move(zeta), best_lambda, iterations, total_cg, kkt, kkt <= tol};
  return result;
}

}  // namespace rspg
