#pragma once

// Brute-force reference solver for the tangent-space proximal subproblem
//
//   min_{zeta in T_X}  <v, zeta> + (1/(2 gamma)) ||zeta||_F^2 + mu ||X + zeta||_1
//
// used to validate the semi-smooth Newton solver. Everything here is built
// from first principles on purpose: the tangent space is materialized as an
// explicit orthonormal basis (via a full QR of X, not the library's
// projection), the l1 proximal map is reimplemented locally, and the solve is
// Douglas-Rachford splitting, a different algorithm family from the Newton
// path it checks. The quadratic half (restricted to the tangent slab) has a
// closed-form prox in basis coordinates; the l1 half is an ambient
// soft-threshold; the splitting converges to the exact constrained minimizer.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rspg/errors.hpp"
#include "rspg/rng.hpp"

namespace rspg {

// Explicit orthonormal basis of the tangent space at X on St(d, r):
//   { (X e_i e_j^T - X e_j e_i^T)/sqrt(2) : i < j }  union  { X_perp e_a e_b^T }
// of dimension d r - r (r + 1) / 2, with X_perp an orthonormal complement of
// the column span of X obtained from a full Householder QR.
class TangentBasis {
 public:
  explicit TangentBasis(const Matrix& X) {
    const Eigen::Index d = X.rows();
    const Eigen::Index r = X.cols();
    if (r > d) throw dimension_error("TangentBasis requires r <= d");
    Eigen::HouseholderQR<Matrix> qr(X);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    Matrix xperp = q.rightCols(d - r);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = i + 1; j < r; ++j) {
        Matrix b = Matrix::Zero(d, r);
        b.col(j) = X.col(i) * inv_sqrt2;
        b.col(i) = -X.col(j) * inv_sqrt2;
        elements_.push_back(std::move(b));
      }
    for (Eigen::Index a = 0; a < d - r; ++a)
      for (Eigen::Index b = 0; b < r; ++b) {
        Matrix e = Matrix::Zero(d, r);
        e.col(b) = xperp.col(a);
        elements_.push_back(std::move(e));
      }
  }

  Eigen::Index dimension() const { return static_cast<Eigen::Index>(elements_.size()); }
  const std::vector<Matrix>& elements() const { return elements_; }

  Vector coordinates(const Matrix& ambient) const {
    Vector c(dimension());
    for (Eigen::Index k = 0; k < dimension(); ++k) c(k) = (elements_[static_cast<std::size_t>(k)].array() * ambient.array()).sum();
    return c;
  }

  Matrix combine(const Vector& c) const {
    Matrix out = Matrix::Zero(elements_.front().rows(), elements_.front().cols());
    for (Eigen::Index k = 0; k < dimension(); ++k) out += c(k) * elements_[static_cast<std::size_t>(k)];
    return out;
  }

 private:
  std::vector<Matrix> elements_;
};

struct OracleSolution {
  Matrix zeta;
  int iterations = 0;
  double fixed_point_residual = 0.0;
};

// Douglas-Rachford reference solve. `step` defaults to gamma / (1 + gamma);
// any positive value converges, the default just keeps the oracle's knobs
// pinned. Iteration cap 1e5 with an early exit once the fixed-point residual
// stalls at rounding level.
inline OracleSolution oracle_solve_subproblem(const Matrix& X, const Matrix& v, double gamma, double mu,
                                              int max_iters = 100000, double step = -1.0, double stop_tol = 1e-13) {
  if (gamma <= 0.0) throw parameter_error("oracle requires gamma > 0");
  if (mu < 0.0) throw parameter_error("oracle requires mu >= 0");
  const double t = (step > 0.0) ? step : gamma / (1.0 + gamma);
  TangentBasis basis(X);
  const Vector a = basis.coordinates(v);
  const double shrink = (gamma * t) / (gamma + t);

  // prox of t * g1 at W, where g1(Y) = <v, Y - X> + ||Y - X||^2 / (2 gamma)
  // restricted to the slab X + T_X: solved exactly in basis coordinates.
  auto prox_quadratic = [&](const Matrix& w) {
    Vector c = shrink * (basis.coordinates(w - X) / t - a);
    return Matrix(X + basis.combine(c));
  };
  auto soft = [](const Matrix& y, double tau) {
    return Matrix(y.unaryExpr([tau](double u) { return (u > tau) ? u - tau : (u < -tau ? u + tau : 0.0); }));
  };

  Matrix w = X;  // splitting state
  Matrix y = X;
  int it = 0;
  double residual = 0.0;
  for (; it < max_iters; ++it) {
    y = prox_quadratic(w);
    Matrix z = soft(2.0 * y - w, t * mu);
    residual = (z - y).norm();
    w += z - y;
    if (residual <= stop_tol * std::max(1.0, y.norm())) {
      ++it;
      break;
    }
  }
  OracleSolution sol;
  sol.zeta = basis.combine(basis.coordinates(y - X));  // exact-tangent representative
  sol.iterations = it;
  sol.fixed_point_residual = residual;
  return sol;
}

// Objective value of the subproblem at a tangent candidate (used by tests to
// compare solver outputs on equal footing).
inline double subproblem_objective(const Matrix& X, const Matrix& v, double gamma, double mu, const Matrix& zeta) {
  return (v.array() * zeta.array()).sum() + zeta.squaredNorm() / (2.0 * gamma) + mu * (X + zeta).cwiseAbs().sum();
}

}  // namespace rspg
