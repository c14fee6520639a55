#pragma once

#include <span>
#include <vector>

#include "spotbot/fuzzy.hpp"
#include "spotbot/types.hpp"

// Data-parallel inner loops. `serial` is the reference implementation used by
// the tests; `parallel` is the OpenMP version used by the library. Both must
// agree bit for bit: every output element is computed by the same expression
// in the same order, only the loop over output elements is split.
namespace spotbot::kernels {

namespace serial {

/// N x N Euclidean distances between rows.
Matrix euclidean_distances(const Matrix& points);
/// N x N fuzzy distances.
Matrix fuzzy_distances(std::span<const TrapFuzzyVector> data, std::size_t levels);
/// Distance from each row to its k-th nearest other row (k >= 1).
std::vector<double> kth_neighbor_distance(const Matrix& dist, std::size_t k);
/// Nearest centroid per point (ties to the lower index); writes squared
/// distances and returns their sum.
double assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> nearest,
                      std::span<double> sq_dist);

}  // namespace serial

namespace parallel {

Matrix euclidean_distances(const Matrix& points);
Matrix fuzzy_distances(std::span<const TrapFuzzyVector> data, std::size_t levels);
std::vector<double> kth_neighbor_distance(const Matrix& dist, std::size_t k);
double assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> nearest,
                      std::span<double> sq_dist);

}  // namespace parallel

/// Squared Euclidean distance between two equally sized rows.
inline double squared_distance(const double* a, const double* b, Eigen::Index dim) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace spotbot::kernels
