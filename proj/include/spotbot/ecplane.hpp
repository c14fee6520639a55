#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spotbot/embed.hpp"
#include "spotbot/types.hpp"

namespace spotbot {

using Permutation = std::vector<std::uint8_t>;

/// Indices that sort the window ascending; equal values keep index order.
Permutation ordinal_pattern(std::span<const double> window);

/// Lexicographic rank of a permutation among all n! permutations (n <= 20).
std::uint64_t permutation_rank(const Permutation& perm);
Permutation permutation_unrank(std::uint64_t rank, std::size_t n);

/// One tuple of per-component permutation ranks.
using PatternKey = std::vector<std::uint64_t>;

struct PatternCount {
  PatternKey key;
  std::uint64_t count;
};

struct OrdinalDistribution {
  std::size_t n = 0;  // window length
  std::size_t m = 1;  // components
  std::size_t total_windows = 0;
  std::vector<PatternCount> patterns;  // sorted by key, counts > 0

  /// log of (n!)^m.
  double log_alphabet() const;
  double alphabet() const;
  double probability(std::size_t i) const {
    return static_cast<double>(patterns[i].count) / static_cast<double>(total_windows);
  }
};

/// (n!)^m as a double plus its log; exact for the sizes that fit in 53 bits.
double alphabet_size(std::size_t n, std::size_t m);
double log_alphabet_size(std::size_t n, std::size_t m);

/// Windows of n consecutive rows over the first m columns; each window yields
/// the tuple of the m per-column ordinal patterns.
OrdinalDistribution multidim_distribution(const Matrix& series, std::size_t n, std::size_t m,
                                          std::size_t stride = 1);
OrdinalDistribution ordinal_distribution(std::span<const double> series, std::size_t n,
                                         std::size_t stride = 1);

struct ECPoint {
  double h = 0.0;
  double c = 0.0;
  std::size_t n = 0;
  std::size_t m = 1;
  double alphabet = 0.0;
};

/// Normalized permutation entropy and MPR statistical complexity. Patterns not
/// observed enter through the uniform reference in closed form.
ECPoint entropy_complexity(const OrdinalDistribution& dist);

/// Probabilities given as (value, multiplicity) groups over an alphabet of size
/// N; entries not covered by the groups are zero. Used for the boundary curves
/// and dense distributions.
struct ProbabilityGroup {
  double p;
  double multiplicity;
};
ECPoint entropy_complexity(std::span<const ProbabilityGroup> groups, double alphabet);

/// Dense probability vector over the full alphabet.
ECPoint entropy_complexity_dense(std::span<const double> probs);

struct HCPoint {
  double h;
  double c;
};

struct BoundaryCurves {
  double alphabet = 0.0;
  std::vector<HCPoint> lower;  // sorted by h
  std::vector<HCPoint> upper;  // sorted by h

  /// Exact boundary value at h (solves the generating family for h).
  double lower_at(double h) const;
  double upper_at(double h) const;
  double max_upper() const;
};

/// Lower: {p, (1-p)/(N-1), ...}. Upper: M zeros, one entry p in [0, 1/(N-M)],
/// the rest equal. When N - 1 exceeds `max_families`, a log-spaced subset of M
/// is sampled for the polyline (the exact evaluators are unaffected).
BoundaryCurves boundary_curves(double alphabet, std::size_t samples = 1000,
                               std::size_t max_families = 2000);

struct ChaoticTest {
  bool chaotic = false;
  double distance_to_upper = 0.0;
};

inline constexpr double kChaoticBandLow = 0.25;
inline constexpr double kChaoticBandHigh = 0.95;
inline constexpr double kDefaultMarginFraction = 0.05;

/// True iff c_upper(h) - c <= margin and h lies in [0.25, 0.95].
ChaoticTest chaotic_area_test(const ECPoint& pt, const BoundaryCurves& curves, double margin);

struct SweepRow {
  std::size_t m = 1;
  std::size_t n = 2;
  double mean_h = 0.0;
  double mean_c = 0.0;
  double chaotic_fraction = 0.0;
  std::size_t texts = 0;
  bool skipped = false;
  std::string reason;
};

struct SweepOptions {
  std::vector<std::size_t> m_grid{1};
  std::vector<std::size_t> n_grid{3, 4, 5, 6};
  std::size_t stride = 1;
  double pattern_budget = 1e7;
  double margin_fraction = kDefaultMarginFraction;
};

/// One EC point per (text, m, n); nullopt when the cell is over budget or the
/// text is shorter than n or narrower than m.
struct TextEC {
  std::string doc_id;
  std::size_t m;
  std::size_t n;
  std::optional<ECPoint> point;
  ChaoticTest chaotic;
};

std::vector<TextEC> ec_points(std::span<const SemanticPath> paths, const SweepOptions& options);
std::vector<SweepRow> parameter_sweep(std::span<const SemanticPath> paths,
                                      const SweepOptions& options);
/// Aggregates precomputed points into sweep rows.
std::vector<SweepRow> summarize_sweep(std::span<const TextEC> points, const SweepOptions& options);

}  // namespace spotbot
