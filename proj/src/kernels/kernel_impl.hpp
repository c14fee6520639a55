#pragma once

// Per-element bodies shared by the serial and OpenMP kernels so both compute
// the same expression for every output element.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "spotbot/kernels.hpp"

namespace spotbot::kernels::detail {

inline double euclid(const Matrix& pts, Eigen::Index i, Eigen::Index j) {
  return std::sqrt(squared_distance(pts.row(i).data(), pts.row(j).data(), pts.cols()));
}

inline double kth_smallest_excluding(const Matrix& dist, Eigen::Index i, std::size_t k,
                                     std::vector<double>& scratch) {
  scratch.clear();
  for (Eigen::Index j = 0; j < dist.cols(); ++j)
    if (j != i) scratch.push_back(dist(i, j));
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   scratch.end());
  return scratch[k - 1];
}

inline int nearest_centroid(const Matrix& points, const Matrix& centroids, Eigen::Index i,
                            double& best) {
  best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(points.row(i).data(), centroids.row(c).data(), points.cols());
    if (d < best) {
      best = d;
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

inline void check_knn(const Matrix& dist, std::size_t k) {
  if (dist.rows() != dist.cols()) throw ValidationError("distance matrix must be square");
  if (k == 0 || k >= static_cast<std::size_t>(dist.rows()))
    throw ValidationError("k must satisfy 1 <= k < N");
}

}  // namespace spotbot::kernels::detail
