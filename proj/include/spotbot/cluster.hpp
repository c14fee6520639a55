#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spotbot/fuzzy.hpp"
#include "spotbot/types.hpp"

namespace spotbot {

/// Label 0 is noise; clusters are numbered 1..k_found.
struct Clustering {
  std::vector<int> labels;
  int k_found = 0;
  std::optional<Matrix> centroids;    // k x dim
  std::optional<Matrix> memberships;  // N x k, row-stochastic
  std::optional<std::vector<double>> log_densities;
  /// Objective after each iteration (inertia for k-means, J_f for c-means).
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  bool converged = false;
};

enum class Algorithm { kmeans, cmeans, wishart, wishart_fuzzy };
Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(Algorithm algo);

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::size_t max_iter = 300;
};

/// k-means++ seeding then Lloyd iterations until the largest centroid shift
/// drops below tol. An emptied cluster is re-seeded at the point farthest from
/// its current centroid.
Clustering kmeans(const Matrix& points, const KMeansOptions& options);

/// k-means++ seeding used by kmeans and cmeans; returns row indices.
std::vector<std::size_t> kmeanspp_seeds(const Matrix& points, std::size_t k, std::uint64_t seed);

struct CMeansOptions {
  std::size_t k = 2;
  double fuzzifier = 2.0;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::size_t max_iter = 300;
};

/// Fuzzy C-Means from k-means++ centroids; alternates membership and centroid
/// updates. A point lying on a centroid gets membership 1 there. Hard labels
/// are the argmax membership.
Clustering cmeans(const Matrix& points, const CMeansOptions& options);

/// Membership update for fixed centroids: u_ic = 1 / sum_l (d_ic / d_il)^(2/(f-1)).
Matrix cmeans_memberships(const Matrix& points, const Matrix& centroids, double fuzzifier);

struct WishartOptions {
  std::size_t k_neighbors = 4;
  /// Significance threshold in natural-log density units.
  double h = 0.0;
  /// Ambient dimension used in the k-NN ball volume.
  double dim = 1.0;
};

/// Density-based Wishart clustering on a symmetric distance matrix with zero
/// diagonal. Points are swept by ascending k-NN radius, ties by index.
Clustering wishart(const Matrix& dist, const WishartOptions& options);

/// Fuzzy distance matrix then wishart with dim = fuzzy vector length.
Clustering wishart_fuzzy(std::span<const TrapFuzzyVector> data, std::size_t k_neighbors,
                         double h, std::size_t alpha_levels = kDefaultAlphaLevels);

/// log of the volume of the dim-ball of the given radius.
double log_ball_volume(double dim, double radius);

/// Pair-counting Rand index between two labelings (1.0 = same partition).
double rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace spotbot
