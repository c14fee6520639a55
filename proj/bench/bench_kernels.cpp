#include <benchmark/benchmark.h>

#include <random>

#include "spotbot/kernels.hpp"

namespace {

using spotbot::Matrix;
namespace k = spotbot::kernels;

Matrix random_points(Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<spotbot::TrapFuzzyVector> random_fuzzy(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<spotbot::TrapFuzzyVector> out(n, spotbot::TrapFuzzyVector(d));
  for (auto& v : out)
    for (auto& x : v) {
      x.m1 = u(rng);
      x.m2 = x.m1 + 0.1 * u(rng);
      x.l = 0.1 * u(rng);
      x.r = 0.1 * u(rng);
      x.height = 0.2 + 0.8 * u(rng);
    }
  return out;
}

template <Matrix (*F)(const Matrix&)>
void BM_Euclidean(benchmark::State& state) {
  const Matrix pts = random_points(state.range(0), 8);
  for (auto _ : state) benchmark::DoNotOptimize(F(pts));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Euclidean<k::serial::euclidean_distances>)->Name("euclidean/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_Euclidean<k::parallel::euclidean_distances>)->Name("euclidean/parallel")->Arg(500)->Arg(2000);

template <bool Parallel>
void BM_Fuzzy(benchmark::State& state) {
  const auto data = random_fuzzy(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    if constexpr (Parallel)
      benchmark::DoNotOptimize(k::parallel::fuzzy_distances(data, 11));
    else
      benchmark::DoNotOptimize(k::serial::fuzzy_distances(data, 11));
  }
}
BENCHMARK(BM_Fuzzy<false>)->Name("fuzzy/serial")->Arg(300);
BENCHMARK(BM_Fuzzy<true>)->Name("fuzzy/parallel")->Arg(300);

template <bool Parallel>
void BM_Knn(benchmark::State& state) {
  const Matrix dist = k::serial::euclidean_distances(random_points(state.range(0), 8));
  for (auto _ : state) {
    if constexpr (Parallel)
      benchmark::DoNotOptimize(k::parallel::kth_neighbor_distance(dist, 8));
    else
      benchmark::DoNotOptimize(k::serial::kth_neighbor_distance(dist, 8));
  }
}
BENCHMARK(BM_Knn<false>)->Name("knn/serial")->Arg(2000);
BENCHMARK(BM_Knn<true>)->Name("knn/parallel")->Arg(2000);

template <bool Parallel>
void BM_Assign(benchmark::State& state) {
  const Matrix pts = random_points(state.range(0), 8);
  const Matrix cents = random_points(16, 8);
  std::vector<int> nearest(static_cast<std::size_t>(pts.rows()));
  std::vector<double> sq(nearest.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      benchmark::DoNotOptimize(k::parallel::assign_nearest(pts, cents, nearest, sq));
    else
      benchmark::DoNotOptimize(k::serial::assign_nearest(pts, cents, nearest, sq));
  }
}
BENCHMARK(BM_Assign<false>)->Name("assign/serial")->Arg(100000);
BENCHMARK(BM_Assign<true>)->Name("assign/parallel")->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
