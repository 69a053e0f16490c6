#pragma once

// Sparse PCA over the Stiefel manifold:
//
//   min_X  (1/n) sum_i ||z_i - X X^T z_i||^2  +  mu ||X||_1
//
// Per-sample smooth gradients use the surrogate -2 z_i z_i^T X by default;
// on tangent directions at a feasible point it has the same inner products as
// the full ambient gradient (their difference is X times a symmetric matrix,
// annihilated by the tangent projection), so optimizer trajectories agree.
// The full ambient convention is available behind a flag for that very check.

#include <cmath>
#include <utility>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/manifold.hpp"
#include "rspg/nonsmooth.hpp"

namespace rspg {

enum class SpcaMode { FiniteSum, Online };
enum class SpcaGradient { Surrogate, FullAmbient };

class SparsePcaProblem {
 public:
  // data: n x d, one sample per row.
  SparsePcaProblem(Matrix data, double mu, SpcaMode mode = SpcaMode::FiniteSum,
                   SpcaGradient convention = SpcaGradient::Surrogate)
      : data_(std::move(data)), mode_(mode), convention_(convention), h_(NonsmoothTerm::l1(mu)) {
    if (data_.rows() < 1 || data_.cols() < 1) throw dimension_error("sparse PCA requires a nonempty data matrix");
    if (!data_.allFinite()) throw numerical_error("sparse PCA data contains NaN/Inf");
    if (mu < 0.0) throw parameter_error("sparse PCA requires mu >= 0");
  }

  int num_samples() const { return static_cast<int>(data_.rows()); }
  Eigen::Index dim() const { return data_.cols(); }
  Geometry geometry() const { return Geometry::Stiefel; }
  SpcaMode mode() const { return mode_; }
  bool supports_full_gradient() const { return mode_ == SpcaMode::FiniteSum; }
  const NonsmoothTerm& nonsmooth() const { return h_; }
  const Matrix& data() const { return data_; }

  // Literal reconstruction loss of one sample at an ambient (possibly
  // infeasible) matrix; the finite-difference checks rely on this form.
  double smooth_sample_loss(const Matrix& Y, int i) const {
    check_index(i);
    Vector z = data_.row(i).transpose();
    Vector residual = z - Y * (Y.transpose() * z);
    return residual.squaredNorm();
  }

  double smooth_loss_at(const Matrix& Y) const {
    double acc = 0.0;
    for (int i = 0; i < num_samples(); ++i) acc += smooth_sample_loss(Y, i);
    return acc / static_cast<double>(num_samples());
  }

  double smooth_loss(const StiefelPoint& X) const { return smooth_loss_at(X.data()); }

  double loss(const StiefelPoint& X) const { return smooth_loss(X) + h_.evaluate(X.data()); }

  Matrix grad_sample(const StiefelPoint& X, int i) const { return grad_sample_at(X.data(), i); }

  Matrix grad_sample_at(const Matrix& Y, int i) const {
    check_index(i);
    Vector z = data_.row(i).transpose();
    Vector u = Y.transpose() * z;
    if (convention_ == SpcaGradient::Surrogate) return -2.0 * z * u.transpose();
    // Full ambient gradient of ||z - Y Y^T z||^2:
    //   -2 [ (I - Y Y^T) z z^T Y + z z^T (I - Y Y^T) Y ]
    Vector pz = z - Y * u;                       // (I - Y Y^T) z
    Vector w = u - (Y.transpose() * Y) * u;      // Y^T (I - Y Y^T) z
    return -2.0 * (pz * u.transpose() + z * w.transpose());
  }

  // Exact batch-mean over the whole dataset, accumulated in index order so a
  // full-batch sgd_estimate reproduces it bitwise.
  Matrix full_gradient(const StiefelPoint& X) const {
    if (!supports_full_gradient()) throw unsupported_error("full gradient unavailable for the online mode");
    Matrix acc = Matrix::Zero(X.rows(), X.cols());
    for (int i = 0; i < num_samples(); ++i) acc += grad_sample(X, i);
    return acc / static_cast<double>(num_samples());
  }

  // Per-sample Euclidean subgradient of the full objective (smooth surrogate
  // plus mu sign(X), with sign(0) = 0), consumed by the subgradient baseline.
  Matrix subgrad_sample(const StiefelPoint& X, int i) const {
    Matrix g = grad_sample(X, i);
    double mu = h_.weight();
    return g + mu * X.data().unaryExpr([](double x) { return (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  }

 private:
  void check_index(int i) const {
    if (i < 0 || i >= num_samples()) throw dimension_error("sparse PCA sample index out of range");
  }

  Matrix data_;
  SpcaMode mode_;
  SpcaGradient convention_;
  NonsmoothTerm h_;
};

}  // namespace rspg
