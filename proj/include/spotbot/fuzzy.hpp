#pragma once

#include <map>
#include <span>
#include <vector>

#include "spotbot/embed.hpp"
#include "spotbot/types.hpp"

namespace spotbot {

struct Interval {
  double left;
  double right;
};

/// Trapezoid with core [m1, m2], flanks of width l and r, and peak `height`.
struct TrapFuzzyNumber {
  double m1 = 0.0;
  double m2 = 0.0;
  double l = 0.0;
  double r = 0.0;
  double height = 1.0;

  double membership(double x) const;
  /// alpha-cut for alpha in [0, height]; alpha = 0 gives the closed support.
  Interval cut(double alpha) const;
  Interval support() const { return {m1 - l, m2 + r}; }
};

using TrapFuzzyVector = std::vector<TrapFuzzyNumber>;

/// Per-dimension fuzzification widths.
struct FuzzParams {
  std::vector<double> delta_c;
  std::vector<double> l;
  std::vector<double> r;

  std::size_t dim() const noexcept { return delta_c.size(); }
  static FuzzParams uniform(std::size_t dim, double delta_c, double l, double r);
  /// delta_c = l = r = factor * stddev of each column of `samples`.
  static FuzzParams from_spread(const Matrix& samples, double factor = 0.1);
};

/// Core [x_j - dc/2, x_j + dc/2], flanks l_j, r_j, height mu.
TrapFuzzyVector fuzzify(std::span<const double> x, double mu, const FuzzParams& params);

/// Concatenates the words' fuzzy vectors and sets every height to the min over words.
TrapFuzzyVector join_ngram(std::span<const TrapFuzzyVector> words);

inline constexpr std::size_t kDefaultAlphaLevels = 11;

/// Mean alpha-cut endpoint distance per component, combined in L2. Levels are
/// spread over [0, min height]; each number is cut at alpha / its own height.
double fuzzy_distance(const TrapFuzzyVector& a, const TrapFuzzyVector& b,
                      std::size_t levels = kDefaultAlphaLevels);

/// Fuzzifies every word of every path point with its stored mu and joins.
/// `params` are per word dimension.
std::vector<TrapFuzzyVector> fuzzify_path(const SemanticPath& path, const FuzzParams& params);

/// Same, with mu recomputed from `frequencies` (normalized token frequencies of the source text).
std::vector<TrapFuzzyVector> fuzzify_path(const SemanticPath& path,
                                          const std::map<TokenId, double>& frequencies,
                                          const FuzzParams& params);

/// mu_w = n_w / max n_w.
std::map<TokenId, double> membership_heights(const std::map<TokenId, double>& frequencies);

/// Word-dimension spread of a path, pooled over the n words of each row.
Matrix pooled_word_vectors(const SemanticPath& path);

}  // namespace spotbot
