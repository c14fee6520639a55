#include "spotbot/ecplane.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace spotbot {

Permutation ordinal_pattern(std::span<const double> window) {
  if (window.size() < 2) throw ValidationError("ordinal_pattern: window length must be >= 2");
  if (window.size() > 255) throw ValidationError("ordinal_pattern: window length must be <= 255");
  for (double v : window)
    if (std::isnan(v)) throw ValidationError("ordinal_pattern: NaN in window");
  Permutation perm(window.size());
  std::iota(perm.begin(), perm.end(), std::uint8_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint8_t a, std::uint8_t b) { return window[a] < window[b]; });
  return perm;
}

std::uint64_t permutation_rank(const Permutation& perm) {
  const std::size_t n = perm.size();
  if (n > 20) throw ValidationError("permutation_rank: n must be <= 20");
  std::uint64_t rank = 0;
  std::uint32_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t below = used & ((1u << perm[i]) - 1u);
    const auto smaller = static_cast<std::uint64_t>(perm[i]) - static_cast<std::uint64_t>(std::popcount(below));
    rank = rank * (n - i) + smaller;
    used |= 1u << perm[i];
  }
  return rank;
}

Permutation permutation_unrank(std::uint64_t rank, std::size_t n) {
  if (n > 20) throw ValidationError("permutation_unrank: n must be <= 20");
  std::vector<std::uint64_t> digits(n);
  for (std::size_t i = n; i-- > 0;) {
    const std::uint64_t base = n - i;
    digits[i] = rank % base;
    rank /= base;
  }
  std::vector<std::uint8_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::uint8_t{0});
  Permutation out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(pool[digits[i]]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(digits[i]));
  }
  return out;
}

double log_alphabet_size(std::size_t n, std::size_t m) {
  return static_cast<double>(m) * std::lgamma(static_cast<double>(n) + 1.0);
}

double alphabet_size(std::size_t n, std::size_t m) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return std::pow(f, static_cast<double>(m));
}

double OrdinalDistribution::log_alphabet() const { return log_alphabet_size(n, m); }
double OrdinalDistribution::alphabet() const { return alphabet_size(n, m); }

namespace {

struct KeyHash {
  std::size_t operator()(const PatternKey& key) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t v : key) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

OrdinalDistribution multidim_distribution(const Matrix& series, std::size_t n, std::size_t m,
                                          std::size_t stride) {
  if (n < 2) throw ValidationError("multidim_distribution: n must be >= 2");
  if (n > 20) throw ValidationError("multidim_distribution: n must be <= 20");
  if (m < 1 || m > static_cast<std::size_t>(series.cols()))
    throw ValidationError("multidim_distribution: m must lie in [1, columns]");
  if (stride < 1) throw ValidationError("multidim_distribution: stride must be >= 1");
  const auto length = static_cast<std::size_t>(series.rows());
  if (length < n) throw ValidationError("multidim_distribution: series shorter than n");

  std::unordered_map<PatternKey, std::uint64_t, KeyHash> counts;
  std::vector<double> window(n);
  PatternKey key(m);
  OrdinalDistribution dist;
  dist.n = n;
  dist.m = m;
  for (std::size_t t = 0; t + n <= length; t += stride) {
    for (std::size_t d = 0; d < m; ++d) {
      for (std::size_t i = 0; i < n; ++i)
        window[i] = series(static_cast<Eigen::Index>(t + i), static_cast<Eigen::Index>(d));
      key[d] = permutation_rank(ordinal_pattern(window));
    }
    ++counts[key];
    ++dist.total_windows;
  }
  dist.patterns.reserve(counts.size());
  for (auto& [k, c] : counts) dist.patterns.push_back({k, c});
  std::sort(dist.patterns.begin(), dist.patterns.end(),
            [](const PatternCount& a, const PatternCount& b) { return a.key < b.key; });
  return dist;
}

OrdinalDistribution ordinal_distribution(std::span<const double> series, std::size_t n,
                                         std::size_t stride) {
  const Matrix column = Eigen::Map<const Matrix>(series.data(), static_cast<Eigen::Index>(series.size()), 1);
  return multidim_distribution(column, n, 1, stride);
}

namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// ((N+1)/N) ln(N+1) - 2 ln(2N) + ln N, rearranged to stay accurate for large N.
double jensen_shannon_max_term(double alphabet) {
  return std::log1p(1.0 / alphabet) + std::log1p(alphabet) / alphabet - 2.0 * std::log(2.0);
}

ECPoint ec_from_groups(std::span<const ProbabilityGroup> groups, double alphabet, double log_alphabet) {
  if (!(alphabet >= 2.0)) throw ValidationError("entropy_complexity: alphabet must be >= 2");
  double entropy = 0.0, mixed = 0.0, support = 0.0;
  const double uniform = 1.0 / alphabet;
  for (const auto& g : groups) {
    if (g.p < 0.0 || g.multiplicity < 0.0)
      throw ValidationError("entropy_complexity: negative probability");
    if (g.p == 0.0) continue;
    entropy -= g.multiplicity * xlogx(g.p);
    mixed -= g.multiplicity * xlogx((g.p + uniform) / 2.0);
    support += g.multiplicity;
  }
  if (support > alphabet * (1.0 + 1e-12))
    throw ValidationError("entropy_complexity: more patterns than the alphabet holds");
  // Unobserved entries of P: the mixture is uniform/2 there.
  const double unseen = std::max(alphabet - support, 0.0);
  mixed += unseen * (uniform / 2.0) * (std::log(2.0) + log_alphabet);

  const double js = std::max(0.0, mixed - entropy / 2.0 - log_alphabet / 2.0);
  const double q0 = -2.0 / jensen_shannon_max_term(alphabet);
  ECPoint pt;
  pt.alphabet = alphabet;
  pt.h = std::clamp(entropy / log_alphabet, 0.0, 1.0);
  pt.c = q0 * js * pt.h;
  return pt;
}

}  // namespace

ECPoint entropy_complexity(std::span<const ProbabilityGroup> groups, double alphabet) {
  return ec_from_groups(groups, alphabet, std::log(alphabet));
}

ECPoint entropy_complexity(const OrdinalDistribution& dist) {
  if (dist.total_windows == 0) throw ValidationError("entropy_complexity: empty distribution");
  std::vector<ProbabilityGroup> groups;
  groups.reserve(dist.patterns.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < dist.patterns.size(); ++i) {
    groups.push_back({dist.probability(i), 1.0});
    total += dist.patterns[i].count;
  }
  if (total != dist.total_windows)
    throw ValidationError("entropy_complexity: counts do not sum to total_windows");
  ECPoint pt = ec_from_groups(groups, dist.alphabet(), dist.log_alphabet());
  pt.n = dist.n;
  pt.m = dist.m;
  return pt;
}

ECPoint entropy_complexity_dense(std::span<const double> probs) {
  std::vector<ProbabilityGroup> groups;
  groups.reserve(probs.size());
  for (double p : probs) groups.push_back({p, 1.0});
  return entropy_complexity(groups, static_cast<double>(probs.size()));
}

namespace {

HCPoint lower_family(double alphabet, double p) {
  const ProbabilityGroup g[] = {{p, 1.0}, {(1.0 - p) / (alphabet - 1.0), alphabet - 1.0}};
  const ECPoint pt = entropy_complexity(g, alphabet);
  return {pt.h, pt.c};
}

// `equal` entries share 1 - p, one entry holds p, the rest of the alphabet is zero.
HCPoint upper_family(double alphabet, double equal, double p) {
  const ProbabilityGroup g[] = {{p, 1.0}, {(1.0 - p) / equal, equal}};
  const ECPoint pt = entropy_complexity(g, alphabet);
  return {pt.h, pt.c};
}

template <typename F>
double bisect(F&& h_of, double lo, double hi, double target, bool increasing) {
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const bool below = h_of(mid) < target;
    if (below == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double BoundaryCurves::lower_at(double h) const {
  if (h <= 0.0) return 0.0;
  if (h >= 1.0) return 0.0;
  const double n = alphabet;
  const double p = bisect([&](double x) { return lower_family(n, x).h; }, 1.0 / n, 1.0, h, false);
  return lower_family(n, p).c;
}

double BoundaryCurves::upper_at(double h) const {
  if (h <= 0.0 || h >= 1.0) return 0.0;
  const double n = alphabet;
  // Family with `equal` entries spans h in [ln(equal)/ln N, ln(equal+1)/ln N].
  double equal = std::floor(std::exp(h * std::log(n)));
  equal = std::clamp(equal, 1.0, n - 1.0);
  while (equal > 1.0 && std::log(equal) / std::log(n) > h) equal -= 1.0;
  while (equal < n - 1.0 && std::log(equal + 1.0) / std::log(n) < h) equal += 1.0;
  const double p = bisect([&](double x) { return upper_family(n, equal, x).h; }, 0.0,
                          1.0 / (equal + 1.0), h, true);
  return upper_family(n, equal, p).c;
}

double BoundaryCurves::max_upper() const {
  if (upper.empty()) return 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < upper.size(); ++i)
    if (upper[i].c > upper[arg].c) arg = i;
  double lo = upper[arg == 0 ? 0 : arg - 1].h;
  double hi = upper[std::min(arg + 1, upper.size() - 1)].h;
  for (int it = 0; it < 100; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (upper_at(a) < upper_at(b))
      lo = a;
    else
      hi = b;
  }
  return std::max(upper[arg].c, upper_at(0.5 * (lo + hi)));
}

BoundaryCurves boundary_curves(double alphabet, std::size_t samples, std::size_t max_families) {
  if (!(alphabet >= 2.0) || alphabet != std::floor(alphabet))
    throw ValidationError("boundary_curves: alphabet must be an integer >= 2");
  if (samples < 2) throw ValidationError("boundary_curves: need at least 2 samples per family");
  BoundaryCurves curves;
  curves.alphabet = alphabet;
  const double step = 1.0 / static_cast<double>(samples);

  for (std::size_t i = 0; i <= samples; ++i) {
    const double p = 1.0 / alphabet + (1.0 - 1.0 / alphabet) * static_cast<double>(i) * step;
    curves.lower.push_back(lower_family(alphabet, std::min(p, 1.0)));
  }

  std::vector<double> equal_counts;
  const double families = alphabet - 1.0;
  if (families <= static_cast<double>(max_families)) {
    for (double e = 1.0; e <= families; e += 1.0) equal_counts.push_back(e);
  } else {
    for (std::size_t i = 0; i < max_families; ++i) {
      const double e = std::round(std::exp(std::log(families) * static_cast<double>(i) /
                                           static_cast<double>(max_families - 1)));
      if (equal_counts.empty() || e > equal_counts.back()) equal_counts.push_back(e);
    }
  }
  for (double e : equal_counts)
    for (std::size_t i = 0; i <= samples; ++i) {
      const double p = static_cast<double>(i) * step / (e + 1.0);
      curves.upper.push_back(upper_family(alphabet, e, p));
    }

  auto by_h = [](const HCPoint& a, const HCPoint& b) { return a.h != b.h ? a.h < b.h : a.c < b.c; };
  std::sort(curves.lower.begin(), curves.lower.end(), by_h);
  std::sort(curves.upper.begin(), curves.upper.end(), by_h);
  return curves;
}

ChaoticTest chaotic_area_test(const ECPoint& pt, const BoundaryCurves& curves, double margin) {
  if (!(pt.h >= 0.0 && pt.h <= 1.0)) throw ValidationError("chaotic_area_test: h outside [0, 1]");
  if (std::abs(pt.alphabet - curves.alphabet) > 1e-9 * curves.alphabet)
    throw ValidationError("chaotic_area_test: curves computed for a different alphabet");
  ChaoticTest out;
  out.distance_to_upper = curves.upper_at(pt.h) - pt.c;
  out.chaotic = out.distance_to_upper <= margin && pt.h >= kChaoticBandLow && pt.h <= kChaoticBandHigh;
  return out;
}

namespace {

struct Cell {
  std::size_t m, n;
  bool skipped;
  std::string reason;
  BoundaryCurves curves;
  double margin = 0.0;
};

std::vector<Cell> make_cells(const SweepOptions& options) {
  if (options.m_grid.empty() || options.n_grid.empty())
    throw ValidationError("parameter_sweep: grids must be non-empty");
  std::vector<Cell> cells;
  for (std::size_t m : options.m_grid)
    for (std::size_t n : options.n_grid) {
      if (m < 1 || n < 2 || n > 20) throw ValidationError("parameter_sweep: need m >= 1 and 2 <= n <= 20");
      Cell cell{m, n, false, {}, {}, 0.0};
      if (log_alphabet_size(n, m) > std::log(options.pattern_budget)) {
        cell.skipped = true;
        cell.reason = "pattern budget exceeded";
      } else {
        cell.curves = boundary_curves(alphabet_size(n, m), 200);
        cell.margin = options.margin_fraction * cell.curves.max_upper();
      }
      cells.push_back(std::move(cell));
    }
  return cells;
}

}  // namespace

std::vector<TextEC> ec_points(std::span<const SemanticPath> paths, const SweepOptions& options) {
  const std::vector<Cell> cells = make_cells(options);
  std::vector<TextEC> out(paths.size() * cells.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(paths.size()); ++p) {
    const SemanticPath& path = paths[p];
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Cell& cell = cells[c];
      TextEC& slot = out[static_cast<std::size_t>(p) * cells.size() + c];
      slot.doc_id = path.doc_id;
      slot.m = cell.m;
      slot.n = cell.n;
      if (cell.skipped || path.length() < cell.n ||
          static_cast<std::size_t>(path.points.cols()) < cell.m)
        continue;
      const ECPoint pt = entropy_complexity(multidim_distribution(path.points, cell.n, cell.m, options.stride));
      slot.point = pt;
      slot.chaotic = chaotic_area_test(pt, cell.curves, cell.margin);
    }
  }
  return out;
}

std::vector<SweepRow> summarize_sweep(std::span<const TextEC> points, const SweepOptions& options) {
  std::vector<SweepRow> rows;
  for (std::size_t m : options.m_grid)
    for (std::size_t n : options.n_grid) {
      SweepRow row;
      row.m = m;
      row.n = n;
      std::size_t chaotic = 0;
      for (const auto& pt : points) {
        if (pt.m != m || pt.n != n || !pt.point) continue;
        ++row.texts;
        row.mean_h += pt.point->h;
        row.mean_c += pt.point->c;
        if (pt.chaotic.chaotic) ++chaotic;
      }
      if (log_alphabet_size(n, m) > std::log(options.pattern_budget)) {
        row.skipped = true;
        row.reason = "pattern budget exceeded";
      } else if (row.texts == 0) {
        row.skipped = true;
        row.reason = "no text long enough";
      } else {
        const double t = static_cast<double>(row.texts);
        row.mean_h /= t;
        row.mean_c /= t;
        row.chaotic_fraction = static_cast<double>(chaotic) / t;
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

std::vector<SweepRow> parameter_sweep(std::span<const SemanticPath> paths, const SweepOptions& options) {
  const auto points = ec_points(paths, options);
  return summarize_sweep(points, options);
}

}  // namespace spotbot
