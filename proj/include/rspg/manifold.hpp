#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "rspg/errors.hpp"
#include "rspg/rng.hpp"

namespace rspg {

// Constraint set for a d x r matrix variable with orthonormal columns.
// Stiefel treats the matrix itself as the variable; Grassmann treats it as a
// representative of its column span (tangent vectors restricted to the
// horizontal space X^T zeta = 0).
enum class Geometry { Stiefel, Grassmann };

enum class RetractionKind { Polar, QR, Cayley, Exponential };

// Projection transport is the default; the isometric variant rescales the
// projected vector back to its original Frobenius norm (exact isometry,
// identity on zero vectors).
enum class TransportKind { Projection, IsometricProjection };

inline constexpr double kOrthonormalityTol = 1e-10;
inline constexpr double kTangencyTol = 1e-8;

inline Matrix sym(const Matrix& A) { return 0.5 * (A + A.transpose()); }

namespace detail {

// Thin QR factor with the R diagonal forced positive, which makes the factor
// unique and the map deterministic.
inline Matrix qr_factor_positive(const Matrix& A) {
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix q = qr.householderQ() * Matrix::Identity(A.rows(), A.cols());
  Matrix r = qr.matrixQR().topRows(A.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

inline Matrix polar_factor(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace detail

class StiefelPoint {
 public:
  StiefelPoint(Matrix data, Geometry geometry = Geometry::Stiefel) : data_(std::move(data)), geometry_(geometry) {
    if (data_.rows() < 1 || data_.cols() < 1) throw dimension_error("StiefelPoint requires d >= 1 and r >= 1");
    if (data_.cols() > data_.rows()) throw dimension_error("StiefelPoint requires r <= d");
    if (!data_.allFinite()) throw numerical_error("StiefelPoint data contains NaN/Inf");
    if (orthonormality_drift() > kOrthonormalityTol) data_ = detail::qr_factor_positive(data_);
  }

  const Matrix& data() const { return data_; }
  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index cols() const { return data_.cols(); }
  Geometry geometry() const { return geometry_; }

  double orthonormality_drift() const {
    return (data_.transpose() * data_ - Matrix::Identity(data_.cols(), data_.cols())).norm();
  }

  bool same_point(const StiefelPoint& other) const {
    return geometry_ == other.geometry_ && data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols() &&
           data_ == other.data_;
  }

 private:
  Matrix data_;
  Geometry geometry_;
};

class TangentVector {
 public:
  TangentVector(Matrix data, StiefelPoint base) : data_(std::move(data)), base_(std::move(base)) {
    if (data_.rows() != base_.rows() || data_.cols() != base_.cols())
      throw dimension_error("TangentVector shape does not match its base point");
    if (!data_.allFinite()) throw numerical_error("TangentVector data contains NaN/Inf");
    const Matrix& x = base_.data();
    double residual = (base_.geometry() == Geometry::Stiefel)
                          ? (data_.transpose() * x + x.transpose() * data_).norm()
                          : (x.transpose() * data_).norm();
    if (residual > kTangencyTol)
      throw contract_error("TangentVector violates tangency (residual " + std::to_string(residual) + ")");
  }

  const Matrix& data() const { return data_; }
  const StiefelPoint& base() const { return base_; }
  double norm() const { return data_.norm(); }

  TangentVector scaled(double a) const { return TangentVector(a * data_, base_); }

 private:
  Matrix data_;
  StiefelPoint base_;
};

// Orthogonal projection of an ambient matrix onto the tangent (Stiefel) or
// horizontal (Grassmann) space at X.
inline TangentVector project_tangent(const StiefelPoint& X, const Matrix& ambient) {
  if (ambient.rows() != X.rows() || ambient.cols() != X.cols())
    throw dimension_error("project_tangent operand shape mismatch");
  if (!ambient.allFinite()) throw numerical_error("project_tangent operand contains NaN/Inf");
  const Matrix& x = X.data();
  Matrix xta = x.transpose() * ambient;
  Matrix projected = (X.geometry() == Geometry::Stiefel) ? Matrix(ambient - x * sym(xta)) : Matrix(ambient - x * xta);
  return TangentVector(std::move(projected), X);
}

namespace detail {

inline StiefelPoint retract_cayley(const StiefelPoint& X, const Matrix& xi) {
  const Matrix& x = X.data();
  const Eigen::Index d = x.rows();
  Matrix pxi = xi - 0.5 * x * (x.transpose() * xi);  // (I - X X^T / 2) xi
  Matrix w = pxi * x.transpose() - x * pxi.transpose();
  Matrix lhs = Matrix::Identity(d, d) - 0.5 * w;
  Matrix rhs = (Matrix::Identity(d, d) + 0.5 * w) * x;
  Eigen::PartialPivLU<Matrix> lu(lhs);
  Matrix y = lu.solve(rhs);
  double residual = (lhs * y - rhs).norm() / std::max(1.0, rhs.norm());
  if (!y.allFinite() || residual > 1e-8)
    throw numerical_error("Cayley system solve failed (relative residual " + std::to_string(residual) + ")");
  return StiefelPoint(std::move(y), X.geometry());
}

inline StiefelPoint retract_exponential(const StiefelPoint& X, const Matrix& xi) {
  const Matrix& x = X.data();
  const Eigen::Index r = x.cols();
  Matrix a = x.transpose() * xi;
  Matrix k = xi - x * a;  // (I - X X^T) xi for tangent xi
  Eigen::HouseholderQR<Matrix> qr(k);
  Matrix q = qr.householderQ() * Matrix::Identity(k.rows(), r);
  Matrix rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j)
    if (rr(j, j) < 0.0) {
      q.col(j) = -q.col(j);
      rr.row(j) = -rr.row(j);
    }
  Matrix block(2 * r, 2 * r);
  block.topLeftCorner(r, r) = a;
  block.topRightCorner(r, r) = -rr.transpose();
  block.bottomLeftCorner(r, r) = rr;
  block.bottomRightCorner(r, r).setZero();
  Matrix e = block.exp();
  Matrix y = x * e.topLeftCorner(r, r) + q * e.bottomLeftCorner(r, r);
  return StiefelPoint(std::move(y), X.geometry());
}

}  // namespace detail

inline StiefelPoint retract(const StiefelPoint& X, const TangentVector& xi, RetractionKind kind = RetractionKind::Polar) {
  if (!xi.base().same_point(X)) throw contract_error("retract called with a tangent vector based at a different point");
  if (xi.data().isZero(0.0)) return X;  // exact: no floating drift on the zero step
  const Matrix& x = X.data();
  switch (kind) {
    case RetractionKind::Polar:
      return StiefelPoint(detail::polar_factor(x + xi.data()), X.geometry());
    case RetractionKind::QR:
      return StiefelPoint(detail::qr_factor_positive(x + xi.data()), X.geometry());
    case RetractionKind::Cayley:
      return detail::retract_cayley(X, xi.data());
    case RetractionKind::Exponential:
      return detail::retract_exponential(X, xi.data());
  }
  throw parameter_error("unknown retraction kind");
}

// Transport of zeta (based anywhere) to the tangent space at `to`.
inline TangentVector transport(const StiefelPoint& to, const TangentVector& zeta,
                               TransportKind kind = TransportKind::Projection) {
  TangentVector projected = project_tangent(to, zeta.data());
  if (kind == TransportKind::IsometricProjection) {
    double source = zeta.norm();
    double target = projected.norm();
    if (source > 0.0 && target > 0.0) return projected.scaled(source / target);
  }
  return projected;
}

inline StiefelPoint random_point(Eigen::Index d, Eigen::Index r, Rng& rng, Geometry geometry = Geometry::Stiefel) {
  if (r > d) throw dimension_error("random_point requires r <= d");
  Matrix g = gaussian_matrix(d, r, rng);
  return StiefelPoint(detail::qr_factor_positive(g), geometry);
}

// Unit-Frobenius-norm random tangent direction at X.
inline TangentVector random_tangent(const StiefelPoint& X, Rng& rng) {
  for (;;) {
    Matrix g = gaussian_matrix(X.rows(), X.cols(), rng);
    TangentVector t = project_tangent(X, g);
    double n = t.norm();
    if (n > 1e-12) return t.scaled(1.0 / n);
  }
}

// QR-based correction used by optimizers to pull accumulated drift back to
// the constraint set. Returns the corrected point; `drift_before` reports the
// pre-correction orthonormality residual.
inline StiefelPoint reorthonormalize(const StiefelPoint& X, double* drift_before = nullptr) {
  if (drift_before != nullptr) *drift_before = X.orthonormality_drift();
  return StiefelPoint(detail::qr_factor_positive(X.data()), X.geometry());
}

}  // namespace rspg
