#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "rspg/errors.hpp"

namespace rspg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Stream ids used to split one master seed into independent generators.
// Keeping the ids centralized means record cadence, parallelism, or metric
// evaluation can never shift which numbers a consumer sees.
enum class SeedStream : std::uint64_t {
  Batch = 1,        // minibatch index sampling
  OutputIndex = 2,  // the sampled iterate index nu
  Init = 3,         // initial point
  Data = 4,         // synthetic dataset generation
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic seed derivation: mixes the master seed with a stream id so
// the derived streams are independent and reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
  std::uint64_t z = detail::splitmix64(master ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(stream) + 1)));
  return detail::splitmix64(z + static_cast<std::uint64_t>(stream));
}

inline Rng make_stream(std::uint64_t master, SeedStream stream) { return Rng(derive_seed(master, stream)); }

// Standard-normal matrix filled in row-major order (fixed traversal keeps the
// draw sequence independent of storage order).
inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw dimension_error("gaussian_matrix requires positive dimensions");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

// Uniform sample of `count` indices from {0..n-1}, with replacement.
inline std::vector<int> sample_batch(int n, int count, Rng& rng) {
  if (n < 1) throw dimension_error("sample_batch requires n >= 1");
  if (count < 1) throw parameter_error("sample_batch requires count >= 1");
  std::uniform_int_distribution<int> uniform(0, n - 1);
  std::vector<int> batch(static_cast<std::size_t>(count));
  for (auto& b : batch) b = uniform(rng);
  return batch;
}

}  // namespace rspg
