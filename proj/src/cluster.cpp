#include "spotbot/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "spotbot/kernels.hpp"

namespace spotbot {

Algorithm parse_algorithm(std::string_view name) {
  if (name == "kmeans") return Algorithm::kmeans;
  if (name == "cmeans") return Algorithm::cmeans;
  if (name == "wishart") return Algorithm::wishart;
  if (name == "wishart-fuzzy") return Algorithm::wishart_fuzzy;
  throw ValidationError("unknown clustering algorithm '" + std::string(name) +
                        "' (kmeans|cmeans|wishart|wishart-fuzzy)");
}

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::kmeans: return "kmeans";
    case Algorithm::cmeans: return "cmeans";
    case Algorithm::wishart: return "wishart";
    case Algorithm::wishart_fuzzy: return "wishart-fuzzy";
  }
  return "kmeans";
}

namespace {

void check_k(const Matrix& points, std::size_t k) {
  if (points.rows() == 0) throw ValidationError("clustering: no points");
  if (k == 0 || k > static_cast<std::size_t>(points.rows()))
    throw ValidationError("clustering: k must satisfy 1 <= k <= N");
}

Matrix gather_rows(const Matrix& points, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), points.cols());
  for (std::size_t c = 0; c < idx.size(); ++c)
    out.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(idx[c]));
  return out;
}

double max_shift(const Matrix& a, const Matrix& b) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < a.rows(); ++c) best = std::max(best, (a.row(c) - b.row(c)).norm());
  return best;
}

}  // namespace

std::vector<std::size_t> kmeanspp_seeds(const Matrix& points, std::size_t k, std::uint64_t seed) {
  check_k(points, k);
  const auto n = static_cast<std::size_t>(points.rows());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> seeds;
  std::vector<bool> chosen(n, false);
  seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  chosen[seeds.back()] = true;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    const auto last = static_cast<Eigen::Index>(seeds.back());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = kernels::squared_distance(points.row(static_cast<Eigen::Index>(i)).data(),
                                                 points.row(last).data(), points.cols());
      d2[i] = std::min(d2[i], d);
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    }
    if (pick == n)  // every remaining point coincides with a seed
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i]) pick = i;
    chosen[pick] = true;
    seeds.push_back(pick);
  }
  return seeds;
}

Clustering kmeans(const Matrix& points, const KMeansOptions& options) {
  check_k(points, options.k);
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<Eigen::Index>(options.k);
  const auto seeds = kmeanspp_seeds(points, options.k, options.seed);
  Matrix centroids = gather_rows(points, seeds);

  Clustering out;
  std::vector<int> nearest(n);
  std::vector<double> sq(n);
  for (std::size_t it = 0; it < std::max<std::size_t>(options.max_iter, 1); ++it) {
    double inertia = kernels::parallel::assign_nearest(points, centroids, nearest, sq);
    // Re-seed emptied clusters at the points farthest from their centroids.
    for (int guard = 0; guard <= k; ++guard) {
      std::vector<std::size_t> sizes(options.k, 0);
      for (int c : nearest) ++sizes[c];
      bool any_empty = false;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (sizes[c] != 0) continue;
        any_empty = true;
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (sq[i] > sq[far]) far = i;
        centroids.row(c) = points.row(static_cast<Eigen::Index>(far));
        sq[far] = 0.0;
        nearest[far] = static_cast<int>(c);
        ++sizes[c];
      }
      if (!any_empty) break;
      inertia = kernels::parallel::assign_nearest(points, centroids, nearest, sq);
    }
    out.objective_history.push_back(inertia);
    out.iterations = it + 1;

    Matrix updated = Matrix::Zero(k, points.cols());
    std::vector<double> sizes(options.k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      updated.row(nearest[i]) += points.row(static_cast<Eigen::Index>(i));
      sizes[nearest[i]] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c)
      updated.row(c) = sizes[c] > 0.0 ? Matrix(updated.row(c) / sizes[c]) : Matrix(centroids.row(c));
    const double shift = max_shift(updated, centroids);
    centroids = std::move(updated);
    if (shift < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = nearest[i] + 1;
  out.k_found = static_cast<int>(options.k);
  out.centroids = std::move(centroids);
  return out;
}

Matrix cmeans_memberships(const Matrix& points, const Matrix& centroids, double fuzzifier) {
  if (!(fuzzifier > 1.0)) throw ValidationError("cmeans: fuzzifier must exceed 1");
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  const double e = 1.0 / (fuzzifier - 1.0);
  Matrix u = Matrix::Zero(n, k);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> logd(static_cast<std::size_t>(k));
    Eigen::Index zero = -1;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d2 =
          kernels::squared_distance(points.row(i).data(), centroids.row(c).data(), points.cols());
      if (d2 == 0.0 && zero < 0) zero = c;
      logd[c] = e * std::log(d2);
    }
    if (zero >= 0) {
      u(i, zero) = 1.0;
      continue;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      double s = 0.0;
      for (Eigen::Index l = 0; l < k; ++l) s += std::exp(logd[c] - logd[l]);
      u(i, c) = 1.0 / s;
    }
    const double row = u.row(i).sum();
    u.row(i) /= row;
  }
  return u;
}

namespace {

double cmeans_objective(const Matrix& points, const Matrix& centroids, const Matrix& u, double f) {
  double j = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
      j += std::pow(u(i, c), f) *
           kernels::squared_distance(points.row(i).data(), centroids.row(c).data(), points.cols());
  return j;
}

}  // namespace

Clustering cmeans(const Matrix& points, const CMeansOptions& options) {
  check_k(points, options.k);
  if (!(options.fuzzifier > 1.0)) throw ValidationError("cmeans: fuzzifier must exceed 1");
  const double f = options.fuzzifier;
  const auto k = static_cast<Eigen::Index>(options.k);
  Matrix centroids = gather_rows(points, kmeanspp_seeds(points, options.k, options.seed));

  Clustering out;
  Matrix u = cmeans_memberships(points, centroids, f);
  out.objective_history.push_back(cmeans_objective(points, centroids, u, f));
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    Matrix updated = Matrix::Zero(k, points.cols());
    for (Eigen::Index c = 0; c < k; ++c) {
      double wsum = 0.0;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double w = std::pow(u(i, c), f);
        updated.row(c) += w * points.row(i);
        wsum += w;
      }
      updated.row(c) = wsum > 0.0 ? Matrix(updated.row(c) / wsum) : Matrix(centroids.row(c));
    }
    const double shift = max_shift(updated, centroids);
    centroids = std::move(updated);
    u = cmeans_memberships(points, centroids, f);
    out.objective_history.push_back(cmeans_objective(points, centroids, u, f));
    out.iterations = it + 1;
    if (shift < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.labels.resize(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index arg = 0;
    u.row(i).maxCoeff(&arg);
    out.labels[i] = static_cast<int>(arg) + 1;
  }
  out.k_found = static_cast<int>(options.k);
  out.centroids = std::move(centroids);
  out.memberships = std::move(u);
  return out;
}

double log_ball_volume(double dim, double radius) {
  return 0.5 * dim * std::log(M_PI) - std::lgamma(0.5 * dim + 1.0) + dim * std::log(radius);
}

namespace {

struct WishartCluster {
  int parent;
  bool open = true;
  double max_log_density;
};

int find_root(std::vector<WishartCluster>& clusters, int c) {
  while (clusters[c].parent != c) {
    clusters[c].parent = clusters[clusters[c].parent].parent;
    c = clusters[c].parent;
  }
  return c;
}

}  // namespace

Clustering wishart(const Matrix& dist, const WishartOptions& options) {
  const Eigen::Index n = dist.rows();
  if (dist.cols() != n) throw ValidationError("wishart: distance matrix must be square");
  if (options.k_neighbors < 1 || options.k_neighbors >= static_cast<std::size_t>(n))
    throw ValidationError("wishart: k_neighbors must satisfy 1 <= k < N");
  if (options.h < 0.0 || std::isnan(options.h)) throw ValidationError("wishart: h must be >= 0");
  if (!(options.dim > 0.0)) throw ValidationError("wishart: dim must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dist(i, i) != 0.0) throw ValidationError("wishart: distance matrix diagonal must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = dist(i, j), b = dist(j, i);
      if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}) || a < 0.0)
        throw ValidationError("wishart: distance matrix is not symmetric and non-negative");
    }
  }

  const std::vector<double> radius = kernels::parallel::kth_neighbor_distance(dist, options.k_neighbors);
  std::vector<double> log_density(static_cast<std::size_t>(n));
  const double log_kn = std::log(static_cast<double>(options.k_neighbors)) - std::log(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    log_density[i] = log_kn - log_ball_volume(options.dim,
                                              std::max(radius[i], std::numeric_limits<double>::min()));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return radius[a] < radius[b]; });

  constexpr int kUnprocessed = -1;
  std::vector<int> label(static_cast<std::size_t>(n), kUnprocessed);
  std::vector<WishartCluster> clusters(1);  // index 0 unused (noise)
  std::vector<Eigen::Index> processed;
  processed.reserve(static_cast<std::size_t>(n));
  std::vector<int> open_roots;

  for (Eigen::Index i : order) {
    bool touches_closed = false;
    open_roots.clear();
    for (Eigen::Index j : processed) {
      if (dist(i, j) > radius[i]) continue;
      if (label[j] == 0) {
        touches_closed = true;
        continue;
      }
      const int root = find_root(clusters, label[j]);
      if (!clusters[root].open) {
        touches_closed = true;
        continue;
      }
      if (std::find(open_roots.begin(), open_roots.end(), root) == open_roots.end())
        open_roots.push_back(root);
    }
    processed.push_back(i);

    if (open_roots.empty()) {
      if (touches_closed) {
        label[i] = 0;
      } else {
        clusters.push_back({static_cast<int>(clusters.size()), true, log_density[i]});
        label[i] = static_cast<int>(clusters.size()) - 1;
      }
      continue;
    }
    if (open_roots.size() == 1) {
      label[i] = open_roots.front();
      continue;
    }
    std::sort(open_roots.begin(), open_roots.end());
    std::size_t significant = 0;
    for (int c : open_roots)
      if (clusters[c].max_log_density - log_density[i] >= options.h) ++significant;
    if (significant >= 2) {
      for (int c : open_roots)
        if (clusters[c].max_log_density - log_density[i] >= options.h) clusters[c].open = false;
      label[i] = 0;
      continue;
    }
    // At most one significant cluster: merge everything into the oldest.
    const int keep = open_roots.front();
    for (std::size_t c = 1; c < open_roots.size(); ++c) {
      const int other = open_roots[c];
      clusters[other].parent = keep;
      clusters[keep].max_log_density =
          std::max(clusters[keep].max_log_density, clusters[other].max_log_density);
    }
    label[i] = keep;
  }

  // Final ids 1..k in order of cluster creation.
  std::map<int, int> renumber;
  Clustering out;
  out.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (label[i] == 0) {
      out.labels[i] = 0;
      continue;
    }
    renumber.emplace(find_root(clusters, label[i]), 0);
  }
  int next = 1;
  for (auto& [root, id] : renumber) id = next++;
  for (Eigen::Index i = 0; i < n; ++i)
    if (label[i] != 0) out.labels[i] = renumber.at(find_root(clusters, label[i]));
  out.k_found = static_cast<int>(renumber.size());
  out.log_densities = std::move(log_density);
  out.converged = true;
  out.iterations = 1;
  return out;
}

Clustering wishart_fuzzy(std::span<const TrapFuzzyVector> data, std::size_t k_neighbors, double h,
                         std::size_t alpha_levels) {
  if (data.empty()) throw ValidationError("wishart_fuzzy: empty dataset");
  const Matrix dist = kernels::parallel::fuzzy_distances(data, alpha_levels);
  return wishart(dist, {k_neighbors, h, static_cast<double>(data.front().size())});
}

double rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("rand_index: labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double sj = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [key, m] : joint) sj += pairs(m);
  for (const auto& [key, m] : ca) sa += pairs(m);
  for (const auto& [key, m] : cb) sb += pairs(m);
  const double total = pairs(n);
  return (total + 2.0 * sj - sa - sb) / total;
}

}  // namespace spotbot
