#include "kernel_impl.hpp"

namespace spotbot::kernels::serial {

Matrix euclidean_distances(const Matrix& points) {
  const Eigen::Index n = points.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) out(i, j) = out(j, i) = detail::euclid(points, i, j);
  return out;
}

Matrix fuzzy_distances(std::span<const TrapFuzzyVector> data, std::size_t levels) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      out(i, j) = out(j, i) = fuzzy_distance(data[i], data[j], levels);
  return out;
}

std::vector<double> kth_neighbor_distance(const Matrix& dist, std::size_t k) {
  detail::check_knn(dist, k);
  std::vector<double> out(static_cast<std::size_t>(dist.rows()));
  std::vector<double> scratch;
  for (Eigen::Index i = 0; i < dist.rows(); ++i)
    out[i] = detail::kth_smallest_excluding(dist, i, k, scratch);
  return out;
}

double assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> nearest,
                      std::span<double> sq_dist) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    nearest[i] = detail::nearest_centroid(points, centroids, i, sq_dist[i]);
    total += sq_dist[i];
  }
  return total;
}

}  // namespace spotbot::kernels::serial
