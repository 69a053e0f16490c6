#pragma once

// Central-difference validation of analytic gradients along random tangent
// directions. The loss callback is evaluated at ambient perturbations X + h D,
// so it must accept (slightly) infeasible matrices; the analytic gradient is
// compared through inner products with the directions, which is exactly what
// tangent algorithms consume.

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "rspg/manifold.hpp"
#include "rspg/rng.hpp"

namespace rspg {

struct GradientCheckReport {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  int directions = 0;
};

// loss: ambient matrix -> double. grad: analytic gradient at X (ambient).
inline GradientCheckReport check_gradient(const std::function<double(const Matrix&)>& loss, const Matrix& grad,
                                          const StiefelPoint& X, int directions, Rng& rng, double h = 1e-6) {
  GradientCheckReport report;
  report.directions = directions;
  double sum = 0.0;
  for (int k = 0; k < directions; ++k) {
    TangentVector dir = random_tangent(X, rng);
    const Matrix& d = dir.data();
    double fd = (loss(X.data() + h * d) - loss(X.data() - h * d)) / (2.0 * h);
    double ip = (grad.array() * d.array()).sum();
    double rel = std::abs(fd - ip) / std::max(1.0, std::abs(ip));
    report.max_rel_err = std::max(report.max_rel_err, rel);
    sum += rel;
  }
  report.mean_rel_err = sum / std::max(1, directions);
  return report;
}

}  // namespace rspg
