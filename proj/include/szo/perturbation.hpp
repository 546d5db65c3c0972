#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "szo/errors.hpp"
#include "szo/rng.hpp"
#include "szo/sparse_vector.hpp"

namespace szo {

/// A sparse Gaussian perturbation restricted to an active set.
struct Perturbation {
  SparseVector vector;
  ActiveSet active;
  std::size_t effective_dim = 0;  // l0 norm of `vector`
};

/// Draws an independent standard normal for every index of `active`, in
/// increasing index order; every other coordinate is exactly zero.
inline Perturbation sample_sparse_gaussian(const ActiveSet& active, RngStream& rng) {
  const auto idx = active.indices();
  std::vector<double> values(idx.size());
  for (double& v : values) v = rng.normal();
  Perturbation p;
  p.vector = SparseVector::from_sorted(active.dim(), idx, values);
  p.active = active;
  p.effective_dim = l0_norm(p.vector);
  return p;
}

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard error of the mean
};

/// Monte Carlo estimate of E||u||^p for u drawn by sample_sparse_gaussian.
inline MomentEstimate moment_statistics(const ActiveSet& active, int p, std::size_t num_samples,
                                        RngStream& rng) {
  if (p != 2 && p != 4) throw ConfigError("moment_estimate: p must be 2 or 4");
  if (num_samples < 10'000) throw ConfigError("moment_estimate: need at least 10^4 samples");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < num_samples; ++s) {
    const double r2 = l2_norm_sq(sample_sparse_gaussian(active, rng).vector);
    const double x = p == 2 ? r2 : r2 * r2;
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(num_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

inline double moment_estimate(const ActiveSet& active, int p, std::size_t num_samples,
                              RngStream& rng) {
  return moment_statistics(active, p, num_samples, rng).mean;
}

}  // namespace szo
