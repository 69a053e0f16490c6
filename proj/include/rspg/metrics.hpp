#pragma once

// Trajectory records and evaluation metrics. Missing metrics stay absent
// (std::optional), never zero-filled: a zero would silently read as a perfect
// score downstream.

#include <cmath>
#include <optional>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/manifold.hpp"
#include "rspg/nonsmooth.hpp"
#include "rspg/subproblem.hpp"

namespace rspg {

struct IterationRecord {
  long long t = 0;
  long long ifo = 0;
  double loss = 0.0;
  std::optional<double> zeta_norm;  // absent on the terminal row (no step is computed there)
  std::optional<double> est_err_sq;
  std::optional<double> g_norm;
  std::optional<double> wall_ms;
};

// Stationarity measure: solve the tangent subproblem at the full gradient and
// map the solution through a retraction,
//   G = (X - Retr_X(xi)) / gamma            (default)
//   G = (X - Retr_X(gamma xi)) / gamma      (scaled variant)
// with the polar retraction unless stated otherwise.
template <class Problem>
Matrix stationarity_G(const Problem& problem, const StiefelPoint& X, double gamma, bool scaled_variant = false,
                      RetractionKind retraction = RetractionKind::Polar, const SubproblemOptions& solver = {}) {
  if (!problem.supports_full_gradient())
    throw unsupported_error("stationarity measure requires full-gradient access (finite-sum problems)");
  if (gamma <= 0.0) throw parameter_error("stationarity measure requires gamma > 0");
  Matrix v = problem.full_gradient(X);
  SubproblemResult sub = solve_subproblem(X, v, gamma, problem.nonsmooth(), solver);
  TangentVector step = scaled_variant ? sub.zeta.scaled(gamma) : sub.zeta;
  StiefelPoint y = retract(X, step, retraction);
  return (X.data() - y.data()) / gamma;
}

template <class Problem>
double stationarity_norm(const Problem& problem, const StiefelPoint& X, double gamma, bool scaled_variant = false,
                         RetractionKind retraction = RetractionKind::Polar, const SubproblemOptions& solver = {}) {
  return stationarity_G(problem, X, gamma, scaled_variant, retraction, solver).norm();
}

// Fraction of data variance captured: tr(X^T A A^T X) / tr(X X^T) with A the
// d x n data matrix (samples as columns).
inline double explained_variance(const StiefelPoint& X, const Matrix& A) {
  if (A.rows() != X.rows()) throw dimension_error("explained_variance: data row dimension must match X");
  double denom = X.data().squaredNorm();
  return (X.data().transpose() * A).squaredNorm() / denom;
}

// Number of entries with magnitude strictly larger than the threshold.
inline long long sparsity_count(const Matrix& X, double threshold = 1e-3) {
  if (threshold <= 0.0) throw parameter_error("sparsity_count requires threshold > 0");
  long long count = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (std::abs(X(i, j)) > threshold) ++count;
  return count;
}

inline double estimator_error_sq(const Matrix& estimate, const Matrix& full_gradient) {
  if (estimate.rows() != full_gradient.rows() || estimate.cols() != full_gradient.cols())
    throw dimension_error("estimator_error_sq shape mismatch");
  return (estimate - full_gradient).squaredNorm();
}

}  // namespace rspg
