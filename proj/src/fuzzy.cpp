#include "spotbot/fuzzy.hpp"

#include <algorithm>
#include <cmath>

namespace spotbot {

double TrapFuzzyNumber::membership(double x) const {
  if (x >= m1 && x <= m2) return height;
  if (x < m1) {
    if (l <= 0.0 || x < m1 - l) return 0.0;
    return height * (x - (m1 - l)) / l;
  }
  if (r <= 0.0 || x > m2 + r) return 0.0;
  return height * ((m2 + r) - x) / r;
}

Interval TrapFuzzyNumber::cut(double alpha) const {
  const double t = std::clamp(alpha / height, 0.0, 1.0);
  return {m1 - l * (1.0 - t), m2 + r * (1.0 - t)};
}

FuzzParams FuzzParams::uniform(std::size_t dim, double delta_c, double l, double r) {
  if (delta_c < 0.0 || l < 0.0 || r < 0.0)
    throw ValidationError("fuzzification widths must be non-negative");
  return {std::vector<double>(dim, delta_c), std::vector<double>(dim, l), std::vector<double>(dim, r)};
}

FuzzParams FuzzParams::from_spread(const Matrix& samples, double factor) {
  const auto dim = static_cast<std::size_t>(samples.cols());
  FuzzParams p{std::vector<double>(dim), std::vector<double>(dim), std::vector<double>(dim)};
  const double rows = static_cast<double>(samples.rows());
  for (std::size_t j = 0; j < dim; ++j) {
    double sd = 0.0;
    if (samples.rows() > 1) {
      const auto col = samples.col(static_cast<Eigen::Index>(j));
      const double mean = col.mean();
      sd = std::sqrt((col.array() - mean).square().sum() / (rows - 1.0));
    }
    p.delta_c[j] = p.l[j] = p.r[j] = factor * sd;
  }
  return p;
}

TrapFuzzyVector fuzzify(std::span<const double> x, double mu, const FuzzParams& params) {
  if (!(mu > 0.0 && mu <= 1.0)) throw ValidationError("fuzzify: mu must lie in (0, 1]");
  if (params.dim() != x.size() || params.l.size() != x.size() || params.r.size() != x.size())
    throw ValidationError("fuzzify: parameter dimension does not match the vector");
  TrapFuzzyVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double half = params.delta_c[j] / 2.0;
    out[j] = {x[j] - half, x[j] + half, params.l[j], params.r[j], mu};
  }
  return out;
}

TrapFuzzyVector join_ngram(std::span<const TrapFuzzyVector> words) {
  if (words.empty()) throw ValidationError("join_ngram: empty n-gram");
  const std::size_t dim = words.front().size();
  double height = 1.0;
  for (const auto& w : words) {
    if (w.size() != dim) throw ValidationError("join_ngram: words differ in dimension");
    for (const auto& f : w) height = std::min(height, f.height);
  }
  TrapFuzzyVector out;
  out.reserve(dim * words.size());
  for (const auto& w : words)
    for (auto f : w) {
      f.height = height;
      out.push_back(f);
    }
  return out;
}

double fuzzy_distance(const TrapFuzzyVector& a, const TrapFuzzyVector& b, std::size_t levels) {
  if (a.size() != b.size()) throw ValidationError("fuzzy_distance: length mismatch");
  if (levels < 2) throw ValidationError("fuzzy_distance: need at least 2 alpha levels");
  const double denom = static_cast<double>(levels - 1);
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double top = std::min(a[j].height, b[j].height);
    double acc = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
      const double alpha = top * static_cast<double>(k) / denom;
      const Interval ca = a[j].cut(alpha);
      const Interval cb = b[j].cut(alpha);
      acc += (std::abs(ca.left - cb.left) + std::abs(ca.right - cb.right)) / 2.0;
    }
    const double dj = acc / static_cast<double>(levels);
    total += dj * dj;
  }
  return std::sqrt(total);
}

namespace {

std::vector<TrapFuzzyVector> fuzzify_rows(const SemanticPath& path, const FuzzParams& params,
                                          auto&& mu_of) {
  if (params.dim() != path.word_dim)
    throw ValidationError("fuzzify_path: parameters must be per word dimension");
  const auto d = static_cast<Eigen::Index>(path.word_dim);
  std::vector<TrapFuzzyVector> out(path.length());
  std::vector<TrapFuzzyVector> words(path.n);
  for (std::size_t t = 0; t < path.length(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t w = 0; w < path.n; ++w) {
      const double* x = path.points.row(row).data() + static_cast<Eigen::Index>(w) * d;
      words[w] = fuzzify(std::span<const double>(x, path.word_dim), mu_of(t, w), params);
    }
    out[t] = join_ngram(words);
  }
  return out;
}

}  // namespace

std::vector<TrapFuzzyVector> fuzzify_path(const SemanticPath& path, const FuzzParams& params) {
  if (static_cast<std::size_t>(path.word_mu.rows()) != path.length() ||
      static_cast<std::size_t>(path.word_mu.cols()) != path.n)
    throw ValidationError("fuzzify_path: path has no stored membership heights");
  return fuzzify_rows(path, params, [&](std::size_t t, std::size_t w) {
    return path.word_mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(w));
  });
}

std::map<TokenId, double> membership_heights(const std::map<TokenId, double>& frequencies) {
  double top = 0.0;
  for (const auto& [t, f] : frequencies) top = std::max(top, f);
  if (top <= 0.0) throw ValidationError("membership_heights: no positive frequency");
  std::map<TokenId, double> out;
  for (const auto& [t, f] : frequencies) out.emplace(t, f / top);
  return out;
}

std::vector<TrapFuzzyVector> fuzzify_path(const SemanticPath& path,
                                          const std::map<TokenId, double>& frequencies,
                                          const FuzzParams& params) {
  if (path.grams.size() != path.length() * path.n)
    throw ValidationError("fuzzify_path: path has no token ids");
  const auto heights = membership_heights(frequencies);
  return fuzzify_rows(path, params, [&](std::size_t t, std::size_t w) {
    const TokenId tok = path.grams[t * path.n + w];
    auto it = heights.find(tok);
    if (it == heights.end()) throw ValidationError("fuzzify_path: token without frequency");
    return it->second;
  });
}

Matrix pooled_word_vectors(const SemanticPath& path) {
  const auto d = static_cast<Eigen::Index>(path.word_dim);
  const auto n = static_cast<Eigen::Index>(path.n);
  Matrix out(path.points.rows() * n, d);
  for (Eigen::Index t = 0; t < path.points.rows(); ++t)
    for (Eigen::Index w = 0; w < n; ++w) out.row(t * n + w) = path.points.row(t).segment(w * d, d);
  return out;
}

}  // namespace spotbot
