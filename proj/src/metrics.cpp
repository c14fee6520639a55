#include "spotbot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace spotbot {

namespace {

struct Groups {
  std::map<int, std::vector<Eigen::Index>> members;  // label -> rows, noise excluded
};

Groups group(const Matrix& points, std::span<const int> labels) {
  if (static_cast<std::size_t>(points.rows()) != labels.size())
    throw ValidationError("cluster statistics: labels do not match points");
  Groups g;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 0) g.members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  return g;
}

Eigen::RowVectorXd mean_of(const Matrix& points, const std::vector<Eigen::Index>& rows) {
  Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(points.cols());
  for (Eigen::Index r : rows) m += points.row(r);
  return m / static_cast<double>(rows.size());
}

double scatter(const Matrix& points, const std::vector<Eigen::Index>& rows,
               const Eigen::RowVectorXd& center) {
  double s = 0.0;
  for (Eigen::Index r : rows) s += (points.row(r) - center).squaredNorm();
  return s;
}

double within_scatter(const Matrix& points, const Groups& g) {
  double ssw = 0.0;
  for (const auto& [label, rows] : g.members) ssw += scatter(points, rows, mean_of(points, rows));
  return ssw;
}

}  // namespace

double rmsstd(const Matrix& points, std::span<const int> labels) {
  const Groups g = group(points, labels);
  double dof = 0.0;
  for (const auto& [label, rows] : g.members) dof += static_cast<double>(rows.size()) - 1.0;
  if (dof <= 0.0)
    throw ValidationError("rmsstd: undefined without a non-noise cluster of at least 2 points");
  return std::sqrt(within_scatter(points, g) / (static_cast<double>(points.cols()) * dof));
}

double rs(const Matrix& points, std::span<const int> labels) {
  const Groups g = group(points, labels);
  std::vector<Eigen::Index> all;
  for (const auto& [label, rows] : g.members) all.insert(all.end(), rows.begin(), rows.end());
  if (all.empty()) throw ValidationError("rs: no non-noise points");
  const double sst = scatter(points, all, mean_of(points, all));
  if (sst <= 0.0) throw ValidationError("rs: total scatter is zero (degenerate data)");
  return (sst - within_scatter(points, g)) / sst;
}

double noise_ratio(std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto noise = std::count(labels.begin(), labels.end(), 0);
  return static_cast<double>(noise) / static_cast<double>(labels.size());
}

Matrix member_centroids(const Matrix& points, std::span<const int> labels) {
  const Groups g = group(points, labels);
  Matrix out(static_cast<Eigen::Index>(g.members.size()), points.cols());
  Eigen::Index r = 0;
  for (const auto& [label, rows] : g.members) out.row(r++) = mean_of(points, rows);
  return out;
}

Linkage parse_linkage(std::string_view text) {
  if (text == "centroid") return Linkage::centroid;
  if (text == "single") return Linkage::single;
  if (text == "complete") return Linkage::complete;
  throw ValidationError("unknown linkage '" + std::string(text) + "' (centroid|single|complete)");
}

namespace {

InterclusterStats summarize(const std::vector<double>& d) {
  InterclusterStats s;
  if (d.empty()) {
    s.degenerate = true;
    return s;
  }
  s.min = *std::min_element(d.begin(), d.end());
  s.max = *std::max_element(d.begin(), d.end());
  s.avg = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  // Keep min <= avg <= max despite rounding when all pairs are equal.
  s.avg = std::clamp(s.avg, s.min, s.max);
  return s;
}

}  // namespace

InterclusterStats intercluster(const Matrix& centroids) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < centroids.rows(); ++i)
    for (Eigen::Index j = i + 1; j < centroids.rows(); ++j)
      d.push_back((centroids.row(i) - centroids.row(j)).norm());
  return summarize(d);
}

InterclusterStats intercluster(const Matrix& points, std::span<const int> labels, Linkage linkage) {
  if (linkage == Linkage::centroid) return intercluster(member_centroids(points, labels));
  const Groups g = group(points, labels);
  std::vector<const std::vector<Eigen::Index>*> sets;
  for (const auto& [label, rows] : g.members) sets.push_back(&rows);
  std::vector<double> d;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      double best = linkage == Linkage::single ? std::numeric_limits<double>::infinity() : 0.0;
      for (Eigen::Index i : *sets[a])
        for (Eigen::Index j : *sets[b]) {
          const double v = (points.row(i) - points.row(j)).norm();
          best = linkage == Linkage::single ? std::min(best, v) : std::max(best, v);
        }
      d.push_back(best);
    }
  }
  return summarize(d);
}

ClusterStats cluster_stats(const Matrix& points, std::span<const int> labels, Linkage linkage) {
  ClusterStats s;
  s.noise_ratio = noise_ratio(labels);
  try {
    s.rmsstd = rmsstd(points, labels);
  } catch (const ValidationError&) {
    s.rmsstd_defined = false;
  }
  try {
    s.rs = rs(points, labels);
  } catch (const ValidationError&) {
    s.rs_defined = false;
  }
  s.inter = intercluster(points, labels, linkage);
  return s;
}

PValueMode parse_pvalue_mode(std::string_view text) {
  if (text == "exact") return PValueMode::exact;
  if (text == "normal") return PValueMode::normal;
  throw ValidationError("unknown p-value mode '" + std::string(text) + "' (exact|normal)");
}

namespace {

// Midranks of `values`, doubled so they are integers; also returns sum(t^3 - t) over tie groups.
std::vector<long long> doubled_midranks(std::span<const double> values, double& tie_term) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<long long> ranks(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    // positions i..j (0-based) share rank ((i+1)+(j+1))/2; doubled = i+j+2
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = static_cast<long long>(i + j + 2);
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

double normal_two_sided(double deviation, double sd) {
  if (!(sd > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(deviation) - 0.5) / sd;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite sample value");
}

}  // namespace

TestResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b, PValueMode mode) {
  if (a.empty() || b.empty()) throw ValidationError("wilcoxon_ranksum: empty sample");
  check_finite(a, "wilcoxon_ranksum");
  check_finite(b, "wilcoxon_ranksum");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double tie_term = 0.0;
  const std::vector<long long> r2 = doubled_midranks(pooled, tie_term);
  long long ra2 = 0;
  for (std::size_t i = 0; i < na; ++i) ra2 += r2[i];

  TestResult out;
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb);
  out.statistic = static_cast<double>(ra2) / 2.0 - dna * (dna + 1.0) / 2.0;

  if (mode == PValueMode::normal) {
    const double dn = static_cast<double>(n);
    const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    out.p_value = normal_two_sided(out.statistic - dna * dnb / 2.0, std::sqrt(std::max(var, 0.0)));
    return out;
  }
  if (n > kExactTestLimit)
    throw ValidationError("wilcoxon_ranksum: exact mode limited to n_a + n_b <= 20");

  // Count subsets of size na by doubled rank sum: ways[size][sum].
  const long long total2 = std::accumulate(r2.begin(), r2.end(), 0LL);
  std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(total2) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = std::min(i + 1, na); s >= 1; --s)
      for (long long v = total2; v >= r2[i]; --v) ways[s][v] += ways[s - 1][v - r2[i]];

  // Deviation from the null mean in quadrupled units: 2 * (2R) - na * (n + 1) * 2.
  const long long center4 = static_cast<long long>(na) * static_cast<long long>(n + 1) * 2;
  const long long observed = std::llabs(2 * ra2 - center4);
  double hits = 0.0, all = 0.0;
  for (long long v = 0; v <= total2; ++v) {
    const double w = ways[na][v];
    if (w == 0.0) continue;
    all += w;
    if (std::llabs(2 * v - center4) >= observed) hits += w;
  }
  out.p_value = hits / all;
  return out;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                PValueMode mode) {
  if (a.size() != b.size()) throw ValidationError("wilcoxon_signed_rank: samples must be paired");
  if (a.empty()) throw ValidationError("wilcoxon_signed_rank: empty sample");
  check_finite(a, "wilcoxon_signed_rank");
  check_finite(b, "wilcoxon_signed_rank");
  std::vector<double> mag;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  TestResult out;
  if (mag.empty()) return out;  // W+ = 0, p = 1
  double tie_term = 0.0;
  const std::vector<long long> r2 = doubled_midranks(mag, tie_term);
  long long w2 = 0;
  for (std::size_t i = 0; i < r2.size(); ++i)
    if (positive[i]) w2 += r2[i];
  const long long total2 = std::accumulate(r2.begin(), r2.end(), 0LL);
  out.statistic = static_cast<double>(w2) / 2.0;
  const double n = static_cast<double>(r2.size());

  if (mode == PValueMode::normal) {
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    out.p_value = normal_two_sided(out.statistic - n * (n + 1.0) / 4.0, std::sqrt(std::max(var, 0.0)));
    return out;
  }
  if (r2.size() > kExactTestLimit)
    throw ValidationError("wilcoxon_signed_rank: exact mode limited to 20 non-zero pairs");
  std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
  ways[0] = 1.0;
  for (long long r : r2)
    for (long long v = total2; v >= r; --v) ways[v] += ways[v - r];
  const long long observed = std::llabs(2 * w2 - total2);
  double hits = 0.0, all = 0.0;
  for (long long v = 0; v <= total2; ++v) {
    if (ways[v] == 0.0) continue;
    all += ways[v];
    if (std::llabs(2 * v - total2) >= observed) hits += ways[v];
  }
  out.p_value = hits / all;
  return out;
}

}  // namespace spotbot
