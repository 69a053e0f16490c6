#pragma once

#include <utility>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/rng.hpp"

namespace rspg {

enum class NonsmoothKind { Zero, L1, MaskedL1 };

// The nonsmooth summand h of the objective. Zero for purely smooth problems,
// weight * ||.||_1 for sparse models, and the masked variant for a Euclidean
// block whose unpenalized entries are pinned to zero (robust-MC S block).
class NonsmoothTerm {
 public:
  static NonsmoothTerm zero() { return NonsmoothTerm(NonsmoothKind::Zero, 0.0, Matrix()); }

  static NonsmoothTerm l1(double weight) {
    if (weight < 0.0) throw parameter_error("l1 weight must be >= 0");
    return NonsmoothTerm(NonsmoothKind::L1, weight, Matrix());
  }

  static NonsmoothTerm masked_l1(double weight, Matrix mask) {
    if (weight < 0.0) throw parameter_error("masked l1 weight must be >= 0");
    if (mask.size() == 0) throw dimension_error("masked l1 requires a nonempty mask");
    return NonsmoothTerm(NonsmoothKind::MaskedL1, weight, std::move(mask));
  }

  NonsmoothKind kind() const { return kind_; }
  double weight() const { return weight_; }
  const Matrix& mask() const { return mask_; }

  double evaluate(const Matrix& Y) const {
    switch (kind_) {
      case NonsmoothKind::Zero:
        return 0.0;
      case NonsmoothKind::L1:
        return weight_ * Y.cwiseAbs().sum();
      case NonsmoothKind::MaskedL1: {
        if (mask_.rows() != Y.rows() || mask_.cols() != Y.cols())
          throw dimension_error("masked l1 evaluate: mask shape mismatch");
        return weight_ * (mask_.array() * Y.array()).abs().sum();
      }
    }
    throw parameter_error("unknown nonsmooth kind");
  }

 private:
  NonsmoothTerm(NonsmoothKind kind, double weight, Matrix mask) : kind_(kind), weight_(weight), mask_(std::move(mask)) {}

  NonsmoothKind kind_;
  double weight_;
  Matrix mask_;  // 0/1 entries; nonzero treated as in-mask
};

// Entrywise soft-threshold, the proximal map of tau * ||.||_1.
inline Matrix prox_l1(const Matrix& Y, double tau) {
  if (tau < 0.0) throw parameter_error("prox_l1 requires tau >= 0");
  if (tau == 0.0) return Y;
  return Y.unaryExpr([tau](double y) { return (y > tau) ? y - tau : (y < -tau ? y + tau : 0.0); });
}

// Masked variant: in-mask entries are soft-thresholded, entries outside the
// mask are set to zero (they are structurally pinned, not merely unpenalized).
inline Matrix prox_masked_l1(const Matrix& Y, double tau, const Matrix& mask) {
  if (tau < 0.0) throw parameter_error("prox_masked_l1 requires tau >= 0");
  if (mask.rows() != Y.rows() || mask.cols() != Y.cols()) throw dimension_error("prox_masked_l1 mask shape mismatch");
  Matrix out = Matrix::Zero(Y.rows(), Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j)
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
      if (mask(i, j) != 0.0) {
        double y = Y(i, j);
        out(i, j) = (y > tau) ? y - tau : (y < -tau ? y + tau : 0.0);
      }
  return out;
}

}  // namespace rspg
