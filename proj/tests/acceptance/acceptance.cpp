// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "spotbot/cluster.hpp"
#include "spotbot/ecplane.hpp"
#include "spotbot/fuzzy.hpp"
#include "spotbot/kernels.hpp"
#include "spotbot/metrics.hpp"
#include "spotbot/pipeline.hpp"

namespace fs = std::filesystem;
using namespace spotbot;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  std::printf("%s criterion %d (%s): %.1fs%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), seconds_since(t0),
              o.detail.str().c_str());
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

// 1 --------------------------------------------------------------------------

void ec_placements(Outcome& o) {
  constexpr std::size_t L = 100000, n = 6;
  const auto t0 = Clock::now();
  const auto curves = boundary_curves(alphabet_size(n, 1), 200);
  const double margin = kDefaultMarginFraction * curves.max_upper();

  std::vector<double> logistic(L);
  double x = 0.1234;
  for (auto& v : logistic) {
    v = x;
    x = 4.0 * x * (1.0 - x);
  }
  const auto pl = entropy_complexity(ordinal_distribution(logistic, n));
  const auto test = chaotic_area_test(pl, curves, margin);
  o.detail << " logistic H=" << pl.h << " C=" << pl.c << " gap=" << test.distance_to_upper;
  o.check(test.chaotic, "logistic map not in the chaotic area");

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> noise(L);
  for (auto& v : noise) v = u(rng);
  const auto pn = entropy_complexity(ordinal_distribution(noise, n));
  o.detail << "; noise H=" << pn.h << " C=" << pn.c;
  o.check(pn.h >= 0.97 && pn.c <= 0.07, "noise outside H>=0.97, C<=0.07");

  std::vector<double> ramp(L);
  for (std::size_t i = 0; i < L; ++i) ramp[i] = static_cast<double>(i);
  const auto pr = entropy_complexity(ordinal_distribution(ramp, n));
  o.detail << "; ramp H=" << pr.h << " C=" << pr.c;
  o.check(pr.h == 0.0 && pr.c == 0.0, "ramp not at the origin");
  o.check(seconds_since(t0) < 30.0, "slower than 30 s");
}

// 2 --------------------------------------------------------------------------

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  const double zero_share = u(rng) * 0.95;
  const double shape = 0.2 + 3.8 * u(rng);
  double sum = 0.0;
  for (auto& v : p) {
    v = u(rng) < zero_share ? 0.0 : std::pow(-std::log(std::max(u(rng), 1e-300)), shape);
    sum += v;
  }
  if (sum == 0.0) {
    p[rng() % n] = 1.0;
    sum = 1.0;
  }
  for (auto& v : p) v /= sum;
  return p;
}

void boundary_containment(Outcome& o) {
  const auto t0 = Clock::now();
  const std::vector<std::size_t> sizes{6, 24, 720};
  std::vector<BoundaryCurves> curves;
  for (auto N : sizes) curves.push_back(boundary_curves(static_cast<double>(N), 200));
  std::mt19937_64 rng(77);
  constexpr int kDraws = 100000;
  int outside = 0;
  double worst = -1.0;
  for (int i = 0; i < kDraws; ++i) {
    const std::size_t k = static_cast<std::size_t>(i) % sizes.size();
    const auto pt = entropy_complexity_dense(random_simplex(rng, sizes[k]));
    const double below = curves[k].lower_at(pt.h) - pt.c, above = pt.c - curves[k].upper_at(pt.h);
    worst = std::max({worst, below, above});
    outside += (below > 1e-9 || above > 1e-9);
  }
  o.detail << " draws=" << kDraws << " outside=" << outside << " worst_excursion=" << worst;
  o.check(outside == 0, "points outside the boundaries");
  o.check(seconds_since(t0) < 60.0, "slower than 60 s");
}

// 3 --------------------------------------------------------------------------

void clustering_recovery(Outcome& o) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double centers[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}};
  Matrix pts(300, 2);
  std::vector<int> truth(300);
  for (int i = 0; i < 300; ++i) {
    truth[i] = i / 100 + 1;
    pts(i, 0) = centers[i / 100][0] + noise(rng);
    pts(i, 1) = centers[i / 100][1] + noise(rng);
  }

  KMeansOptions ko;
  ko.k = 3;
  const auto km = kmeans(pts, ko);
  const double ri = rand_index(km.labels, truth);
  o.detail << " kmeans RI=" << ri;
  o.check(ri == 1.0, "k-means Rand index below 1");

  const Matrix dist = kernels::parallel::euclidean_distances(pts);
  WishartOptions wo;
  wo.k_neighbors = 5;
  wo.h = 0.0;
  wo.dim = 2;
  const auto w = wishart(dist, wo);
  const double nr = noise_ratio(w.labels);
  o.detail << "; wishart(h=0) clusters=" << w.k_found << " noise=" << nr;
  o.check(w.k_found == 3 && nr < 0.05, "wishart h=0 did not find 3 clusters with <5% noise");
  wo.h = 3.0;
  const auto w3 = wishart(dist, wo);
  o.detail << " (diagnostic h=3: clusters=" << w3.k_found << " noise=" << noise_ratio(w3.labels) << ")";

  std::vector<TrapFuzzyVector> crisp(300);
  const auto zero = FuzzParams::uniform(2, 0.0, 0.0, 0.0);
  for (int i = 0; i < 300; ++i) {
    const double row[2] = {pts(i, 0), pts(i, 1)};
    crisp[static_cast<std::size_t>(i)] = fuzzify(row, 1.0, zero);
  }
  for (double h : {0.0, 3.0}) {
    wo.h = h;
    const auto f = wishart_fuzzy(crisp, 5, h);
    o.check(f.labels == wishart(dist, wo).labels, "fuzzy wishart differs from crisp at h=" + std::to_string(h));
  }
  CMeansOptions co;
  co.k = 3;
  co.fuzzifier = 1.05;
  const auto cm = cmeans(pts, co);
  o.detail << "; cmeans(f=1.05) RI vs kmeans=" << rand_index(cm.labels, km.labels);
  o.check(rand_index(cm.labels, km.labels) == 1.0, "near-crisp c-means differs from k-means");
}

// 4 --------------------------------------------------------------------------

std::vector<double> midranks(const std::vector<double>& pooled) {
  std::vector<double> r(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    double less = 0, equal = 0;
    for (double y : pooled) {
      less += y < pooled[i];
      equal += y == pooled[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

double brute_ranksum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto rank = midranks(pooled);
  const std::size_t n = pooled.size(), na = a.size();
  double observed = 0.0;
  for (std::size_t i = 0; i < na; ++i) observed += rank[i];
  const double mu = static_cast<double>(na * (n + 1)) / 2.0;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
  double hits = 0, total = 0;
  do {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) s += rank[i];
    total += 1;
    hits += std::abs(s - mu) >= std::abs(observed - mu) - 1e-9;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return hits / total;
}

void metric_oracles(Outcome& o) {
  // Two 1-D clusters {0, 2} and {10, 12}: SSW = 4, SST = 104.
  Matrix p(4, 1);
  p << 0, 2, 10, 12;
  const std::vector<int> l{1, 1, 2, 2};
  o.check(std::abs(rmsstd(p, l) - std::sqrt(4.0 / 2.0)) < 1e-9, "rmsstd 1-D");
  o.check(std::abs(rs(p, l) - (1.0 - 4.0 / 104.0)) < 1e-9, "rs 1-D");

  // 2-D: clusters {(0,0),(2,0),(0,2)} and {(5,5),(7,5)}; brute-force sums.
  Matrix q(5, 2);
  q << 0, 0, 2, 0, 0, 2, 5, 5, 7, 5;
  const std::vector<int> lq{1, 1, 1, 2, 2};
  double ssw = 0, sst = 0;
  Eigen::RowVectorXd grand = q.colwise().mean();
  for (int c = 1; c <= 2; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
    int cnt = 0;
    for (int i = 0; i < 5; ++i)
      if (lq[i] == c) mean += q.row(i), ++cnt;
    mean /= cnt;
    for (int i = 0; i < 5; ++i)
      if (lq[i] == c) ssw += (q.row(i) - mean).squaredNorm();
  }
  for (int i = 0; i < 5; ++i) sst += (q.row(i) - grand).squaredNorm();
  o.check(std::abs(rmsstd(q, lq) - std::sqrt(ssw / (2.0 * 3.0))) < 1e-9, "rmsstd 2-D");
  o.check(std::abs(rs(q, lq) - (sst - ssw) / sst) < 1e-9, "rs 2-D");

  Matrix cents(3, 1);
  cents << 0, 3, 7;
  const auto ic = intercluster(cents);
  o.check(std::abs(ic.avg - 14.0 / 3.0) < 1e-9 && ic.min == 3.0 && ic.max == 7.0, "intercluster centroids");
  Matrix r(4, 1);
  r << 0, 2, 10, 16;
  const std::vector<int> lr{1, 1, 2, 2};
  o.check(std::abs(intercluster(r, lr, Linkage::single).min - 8.0) < 1e-9, "single linkage");
  o.check(std::abs(intercluster(r, lr, Linkage::complete).max - 16.0) < 1e-9, "complete linkage");
  o.check(std::abs(intercluster(r, lr, Linkage::centroid).avg - 12.0) < 1e-9, "centroid linkage");

  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 2.0);
  double worst_exact = 0.0, worst_normal = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = std::round(z(rng));
    for (auto& v : b) v = std::round(z(rng) + 1.0);
    worst_exact = std::max(worst_exact, std::abs(wilcoxon_ranksum(a, b, PValueMode::exact).p_value -
                                                 brute_ranksum_p(a, b)));
    std::vector<double> c(8), d(8);
    for (auto& v : c) v = z(rng);
    for (auto& v : d) v = z(rng) + 1.5;
    worst_normal = std::max(worst_normal, std::abs(wilcoxon_ranksum(c, d, PValueMode::normal).p_value -
                                                   wilcoxon_ranksum(c, d, PValueMode::exact).p_value));
  }
  o.detail << " exact-vs-enumeration max|dp|=" << worst_exact << " normal-vs-exact(n=8) max|dp|=" << worst_normal;
  o.check(worst_exact <= 1e-12, "exact rank-sum disagrees with enumeration");
  o.check(worst_normal <= 0.02, "normal approximation off by more than 0.02");
}

// 5-7 ------------------------------------------------------------------------

PipelineConfig mini_corpus_config(const fs::path& out) {
  PipelineConfig c = parse_config(
      "ec.m = 1,2\n"
      "ec.n = 3..6\n"
      "classify.folds = 5\n"
      "cluster.algo = kmeans\n"
      "seed = 7\n");
  c.manifests.push_back(fs::path(SPOTBOT_MINI_CORPUS) / "manifest.json");
  c.out_dir = out;
  c.use_cache = false;
  return c;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / ("spotbot_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);

  report(1, "E-C plane placements", ec_placements);
  report(2, "boundary containment", boundary_containment);
  report(3, "clustering recovery", clustering_recovery);
  report(4, "metric oracles", metric_oracles);

  std::optional<RunReport> first;
  double first_seconds = 0.0;
  try {
    const auto t0 = Clock::now();
    first = run_pipeline(mini_corpus_config(work / "run_a"));
    first_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    std::printf("mini-corpus run failed: %s\n", e.what());
  }

  report(5, "compactness direction on the mini-corpus", [&](Outcome& o) {
    o.check(first.has_value() && first->rmsstd_test.has_value(), "pipeline run missing");
    if (!o.pass) return;
    const auto& t = *first->rmsstd_test;
    o.detail << " texts=" << first->human_texts << "+" << first->bot_texts << " U=" << t.statistic
             << " p=" << t.p_value << " median human=" << first->human_rmsstd_median
             << " bot=" << first->bot_rmsstd_median << " more compact: "
             << (first->bot_rmsstd_median < first->human_rmsstd_median ? "bot" : "human");
    o.check(first->human_texts >= 20, "fewer than 20 human texts");
    o.check(t.p_value < 0.05, "rank-sum p >= 0.05");
  });

  report(6, "EC classification on the mini-corpus", [&](Outcome& o) {
    o.check(first.has_value() && first->best_ec_cell.has_value(), "pipeline run missing");
    if (!o.pass) return;
    for (const auto& cell : first->ec_cells)
      if (!cell.skipped) o.detail << " (" << cell.m << "," << cell.n << ")=" << cell.cv_mean;
    const auto& b = *first->best_ec_cell;
    o.detail << "; best m=" << b.m << " n=" << b.n << " cv=" << b.cv_mean << "+-" << b.cv_sd
             << " holdout=" << b.test_accuracy << " run=" << first_seconds << "s";
    o.check(b.cv_mean >= 0.90, "5-fold CV accuracy below 0.90");
    o.check(first_seconds < 600.0, "slower than 10 min");
  });

  report(7, "determinism of run", [&](Outcome& o) {
    o.check(first.has_value(), "pipeline run missing");
    if (!o.pass) return;
    const auto second = run_pipeline(mini_corpus_config(work / "run_b"));
    std::size_t csvs = 0;
    for (const auto& [file, hash] : first->file_hashes) {
      if (file.size() > 4 && file.ends_with(".csv")) ++csvs;
      const auto it = second.file_hashes.find(file);
      o.check(it != second.file_hashes.end() && it->second == hash, file + " differs");
    }
    o.check(first->file_hashes.size() == second.file_hashes.size(), "different output sets");
    o.check(csvs > 0, "no CSV outputs hashed");
    o.detail << " csv files compared=" << csvs;
  });

  report(8, "invariant property suites", [&](Outcome& o) {
    const std::string list = std::string(SPOTBOT_UNIT) + " --gtest_filter='Property.*' --gtest_list_tests";
    std::size_t suites = 0;
    if (FILE* pipe = ::popen(list.c_str(), "r")) {
      char line[512];
      while (std::fgets(line, sizeof line, pipe))
        if (line[0] == ' ') ++suites;
      ::pclose(pipe);
    }
    const std::string run = std::string(SPOTBOT_UNIT) + " --gtest_filter='Property.*' > " +
                            (work / "properties.log").string() + " 2>&1";
    const int rc = std::system(run.c_str());
    o.detail << " suites=" << suites << " log=" << (work / "properties.log").string();
    o.check(suites >= 15, "property suites missing");
    o.check(WIFEXITED(rc) && WEXITSTATUS(rc) == 0, "property failures");
  });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
