#pragma once

// Seeded synthetic dataset generators. Sparse PCA plants a sparse orthonormal
// loading matrix (disjoint column supports) and draws samples
// z = X* c + sigma eps with decaying component variances. Robust MC plants a
// low-rank matrix, observes a fraction of entries, and corrupts a fraction of
// the observed ones with large-magnitude outliers.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rspg/errors.hpp"
#include "rspg/problems/robust_mc.hpp"
#include "rspg/rng.hpp"

namespace rspg {

struct SpcaSynthConfig {
  int n = 500;
  int d = 50;
  int r = 5;
  int support = 8;         // nonzeros per planted column
  double noise = 0.1;      // sigma
  double top_variance = 4.0;
  double variance_decay = 0.8;
};

struct SpcaSynthData {
  Matrix data;     // n x d samples
  Matrix planted;  // d x r sparse orthonormal loadings
};

inline SpcaSynthData synth_sparse_pca(const SpcaSynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 1 || cfg.d < 1 || cfg.r < 1) throw parameter_error("synth_sparse_pca requires positive n, d, r");
  if (cfg.r > cfg.d) throw dimension_error("synth_sparse_pca requires r <= d");
  if (cfg.support < 1 || cfg.support * cfg.r > cfg.d)
    throw parameter_error("synth_sparse_pca requires 1 <= support and support * r <= d (disjoint supports)");
  if (cfg.noise < 0.0 || cfg.top_variance <= 0.0 || cfg.variance_decay <= 0.0 || cfg.variance_decay > 1.0)
    throw parameter_error("synth_sparse_pca variance parameters out of range");
  Rng rng = make_stream(seed, SeedStream::Data);

  Matrix planted = Matrix::Zero(cfg.d, cfg.r);
  for (int k = 0; k < cfg.r; ++k) {
    Vector block = gaussian_matrix(cfg.support, 1, rng).col(0);
    planted.col(k).segment(static_cast<Eigen::Index>(k) * cfg.support, cfg.support) = block / block.norm();
  }

  Matrix data(cfg.n, cfg.d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < cfg.n; ++i) {
    Vector z = Vector::Zero(cfg.d);
    for (int k = 0; k < cfg.r; ++k) {
      double sd = std::sqrt(cfg.top_variance * std::pow(cfg.variance_decay, k));
      z += (sd * normal(rng)) * planted.col(k);
    }
    for (int a = 0; a < cfg.d; ++a) z(a) += cfg.noise * normal(rng);
    data.row(i) = z.transpose();
  }
  return SpcaSynthData{std::move(data), std::move(planted)};
}

struct RmcSynthConfig {
  int m = 30;
  int n = 25;
  int r = 3;
  double observe_fraction = 0.5;
  double corrupt_fraction = 0.05;  // fraction of observed entries hit by outliers
  double corrupt_scale = 5.0;
};

struct RmcSynthData {
  std::vector<ObservedEntry> omega;  // observed (possibly corrupted) entries
  Matrix ground_truth;               // the planted low-rank matrix
};

inline RmcSynthData synth_robust_mc(const RmcSynthConfig& cfg, std::uint64_t seed) {
  if (cfg.m < 1 || cfg.n < 1 || cfg.r < 1) throw parameter_error("synth_robust_mc requires positive m, n, r");
  if (cfg.r > std::min(cfg.m, cfg.n)) throw dimension_error("synth_robust_mc requires r <= min(m, n)");
  if (cfg.observe_fraction <= 0.0 || cfg.observe_fraction > 1.0)
    throw parameter_error("synth_robust_mc observe_fraction must lie in (0, 1]");
  if (cfg.corrupt_fraction < 0.0 || cfg.corrupt_fraction > 1.0)
    throw parameter_error("synth_robust_mc corrupt_fraction must lie in [0, 1]");
  Rng rng = make_stream(seed, SeedStream::Data);

  Matrix a = gaussian_matrix(cfg.m, cfg.r, rng);
  Matrix b = gaussian_matrix(cfg.r, cfg.n, rng);
  Matrix truth = a * b / std::sqrt(static_cast<double>(cfg.r));

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  RmcSynthData out;
  out.ground_truth = truth;
  for (int i = 0; i < cfg.m; ++i)
    for (int j = 0; j < cfg.n; ++j) {
      if (coin(rng) > cfg.observe_fraction) continue;
      double value = truth(i, j);
      if (coin(rng) < cfg.corrupt_fraction) {
        double sign = (coin(rng) < 0.5) ? -1.0 : 1.0;
        value += sign * cfg.corrupt_scale * (1.0 + std::abs(normal(rng)));
      }
      out.omega.push_back({i, j, value});
    }
  if (out.omega.empty()) throw parameter_error("synth_robust_mc produced an empty observation set; raise observe_fraction");
  return out;
}

}  // namespace rspg
