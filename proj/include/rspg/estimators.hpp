#pragma once

// Stochastic gradient estimators. `sgd_estimate` is the minibatch mean of
// per-sample Euclidean gradients; `sarah_estimate` is the recursive
// variance-reduced estimator with periodic anchors:
//
//   anchor (phase % q == 0):  v_t = grad over S1 (ALL = exact full gradient)
//   recursion:                v_t = grad_{S2}(X_t)
//                                   - transport(Proj_{X_{t-1}}(grad_{S2}(X_{t-1}) - v_{t-1}))
//
// The estimate itself stays an ambient matrix; only the correction bracket is
// projected before transport. Minibatches are drawn with replacement. S2 = ALL
// evaluates the exact full gradient at both points. IFO accounting: |batch|
// per sgd call, |S1| per anchor, 2 |S2| per recursion step (the batch is
// evaluated at both points).

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/manifold.hpp"
#include "rspg/rng.hpp"

namespace rspg {

inline constexpr int kBatchAll = -1;

struct BatchSpec {
  int anchor = kBatchAll;  // anchor batch size |S1|; kBatchAll = full dataset
  int inner = 1;           // recursion batch size |S2|; kBatchAll = full dataset
  int q = 1;               // anchor period

  void validate(int n) const {
    if (q < 1) throw parameter_error("BatchSpec requires q >= 1");
    if (inner != kBatchAll && inner < 1) throw parameter_error("BatchSpec inner batch size must be >= 1 or ALL");
    if (anchor != kBatchAll && anchor < 1) throw parameter_error("BatchSpec anchor must be >= 1 or ALL");
    if (n < 1) throw dimension_error("BatchSpec: dataset is empty");
  }
};

struct EstimatorState {
  std::optional<StiefelPoint> prev_point;
  Matrix prev_estimate;
  long long ifo_count = 0;
  long long phase = 0;  // calls made; anchor taken when phase % q == 0
};

template <class Problem>
Matrix batch_mean_gradient(const Problem& problem, const StiefelPoint& X, const std::vector<int>& batch) {
  Matrix acc = Matrix::Zero(X.rows(), X.cols());
  for (int i : batch) acc += problem.grad_sample(X, i);
  return acc / static_cast<double>(batch.size());
}

template <class Problem>
Matrix sgd_estimate(const Problem& problem, const StiefelPoint& X, const std::vector<int>& batch,
                    long long& ifo_count) {
  if (batch.empty()) throw parameter_error("sgd_estimate requires a nonempty batch");
  Matrix v = batch_mean_gradient(problem, X, batch);
  ifo_count += static_cast<long long>(batch.size());
  return v;
}

template <class Problem>
Matrix sarah_estimate(const Problem& problem, const StiefelPoint& X, EstimatorState& state, const BatchSpec& spec,
                      Rng& rng, TransportKind transport_kind = TransportKind::Projection) {
  const int n = problem.num_samples();
  spec.validate(n);
  Matrix v;
  if (state.phase % spec.q == 0) {
    if (spec.anchor == kBatchAll) {
      if (!problem.supports_full_gradient())
        throw unsupported_error("anchor batch ALL requires full-gradient access (finite-sum problems)");
      v = problem.full_gradient(X);
      state.ifo_count += n;
    } else {
      std::vector<int> batch = sample_batch(n, spec.anchor, rng);
      v = batch_mean_gradient(problem, X, batch);
      state.ifo_count += spec.anchor;
    }
  } else {
    if (!state.prev_point.has_value() || state.prev_estimate.size() == 0)
      throw contract_error("sarah_estimate recursion step without prior state");
    Matrix g_here, g_prev;
    long long cost = 0;
    if (spec.inner == kBatchAll) {
      if (!problem.supports_full_gradient())
        throw unsupported_error("inner batch ALL requires full-gradient access (finite-sum problems)");
      g_here = problem.full_gradient(X);
      g_prev = problem.full_gradient(*state.prev_point);
      cost = 2LL * n;
    } else {
      std::vector<int> batch = sample_batch(n, spec.inner, rng);
      g_here = batch_mean_gradient(problem, X, batch);
      g_prev = batch_mean_gradient(problem, *state.prev_point, batch);
      cost = 2LL * spec.inner;
    }
    TangentVector bracket = project_tangent(*state.prev_point, g_prev - state.prev_estimate);
    TangentVector carried = transport(X, bracket, transport_kind);
    v = g_here - carried.data();
    state.ifo_count += cost;
  }
  state.prev_point = X;
  state.prev_estimate = v;
  ++state.phase;
  return v;
}

}  // namespace rspg
