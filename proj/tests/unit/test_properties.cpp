#include <gtest/gtest.h>

#include <Eigen/QR>
#include <algorithm>
#include <map>
#include <numeric>

#include "spotbot/classify.hpp"
#include "spotbot/cluster.hpp"
#include "spotbot/corpus.hpp"
#include "spotbot/ecplane.hpp"
#include "spotbot/embed.hpp"
#include "spotbot/fuzzy.hpp"
#include "spotbot/kernels.hpp"
#include "spotbot/metrics.hpp"
#include "test_util.hpp"

namespace spotbot {
namespace {

using testing::Gen;
using testing::kPropertyCases;

std::vector<double> random_series(Gen& g, std::size_t len) {
  std::vector<double> s(len);
  for (auto& x : s) x = g.normal();
  return s;
}

std::vector<int> random_labels(Gen& g, std::size_t n, int k) {
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i % static_cast<std::size_t>(k)) + 1;
  std::shuffle(l.begin(), l.end(), g.engine());
  return l;
}

Matrix random_rotation(Gen& g, std::size_t d) {
  const Matrix a = g.matrix(d, d);
  return Eigen::HouseholderQR<Matrix>(a).householderQ();
}

TEST(Property, EntropyInvariantUnderMonotoneMaps) {
  Gen g(101);
  for (int c = 0; c < kPropertyCases; ++c) {
    const auto s = random_series(g, g.index(20, 200));
    const std::size_t n = g.index(2, 5);
    const double a = g.uniform(0.1, 5.0), b = g.normal();
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(a * s[i] + b);
    const auto p = entropy_complexity(ordinal_distribution(s, n));
    const auto q = entropy_complexity(ordinal_distribution(t, n));
    ASSERT_EQ(p.h, q.h) << "case " << c;
    ASSERT_EQ(p.c, q.c);
  }
}

TEST(Property, EntropyInvariantUnderReversal) {
  Gen g(102);
  for (int c = 0; c < kPropertyCases; ++c) {
    auto s = random_series(g, g.index(20, 200));
    const std::size_t n = g.index(2, 5);
    const auto p = entropy_complexity(ordinal_distribution(s, n));
    std::reverse(s.begin(), s.end());
    const auto q = entropy_complexity(ordinal_distribution(s, n));
    ASSERT_NEAR(p.h, q.h, 1e-12) << "case " << c;
    ASSERT_NEAR(p.c, q.c, 1e-12);
  }
}

TEST(Property, ComplexityVanishesAtEntropyExtremes) {
  Gen g(103);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t n = g.index(2, 6);
    const std::vector<double> flat(g.index(n, 60), g.normal());
    const auto p = entropy_complexity(ordinal_distribution(flat, n));
    ASSERT_EQ(p.h, 0.0);
    ASSERT_EQ(p.c, 0.0);

    const std::size_t N = g.index(2, 800);
    const std::vector<double> uniform(N, 1.0 / static_cast<double>(N));
    const auto u = entropy_complexity_dense(uniform);
    ASSERT_NEAR(u.h, 1.0, 1e-12);
    ASSERT_NEAR(u.c, 0.0, 1e-12);
  }
}

TEST(Property, EcPointsStayInsideBoundaries) {
  Gen g(104);
  const std::vector<std::size_t> sizes{6, 24, 120};
  std::vector<BoundaryCurves> curves;
  for (auto N : sizes) curves.push_back(boundary_curves(static_cast<double>(N), 200));
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t pick = g.index(0, sizes.size() - 1);
    const auto p = g.simplex(sizes[pick]);
    const auto pt = entropy_complexity_dense(p);
    ASSERT_GE(pt.h, 0.0);
    ASSERT_LE(pt.h, 1.0);
    ASSERT_GE(pt.c, curves[pick].lower_at(pt.h) - 1e-9) << "case " << c;
    ASSERT_LE(pt.c, curves[pick].upper_at(pt.h) + 1e-9) << "case " << c;
  }
}

TEST(Property, PatternProbabilitiesSumToOne) {
  Gen g(105);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t len = g.index(10, 150), m = g.index(1, 3), n = g.index(2, 4), stride = g.index(1, 3);
    if (len < n) continue;
    Matrix s = g.matrix(len, m);
    if (g.coin()) s = s.array().round();  // ties
    const auto d = multidim_distribution(s, n, m, stride);
    double total = 0.0;
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < d.patterns.size(); ++i) {
      total += d.probability(i);
      count += d.patterns[i].count;
      if (i > 0) ASSERT_LT(d.patterns[i - 1].key, d.patterns[i].key);
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
    ASSERT_EQ(count, d.total_windows);
    ASSERT_EQ(d.total_windows, ngram_count(len, n, stride));
  }
}

TEST(Property, KMeansInertiaNeverIncreases) {
  Gen g(106);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t n = g.index(5, 60), d = g.index(1, 4);
    const Matrix pts = g.matrix(n, d);
    KMeansOptions opt;
    opt.k = g.index(1, std::min<std::size_t>(n, 6));
    opt.seed = static_cast<std::uint64_t>(c);
    const auto r = kmeans(pts, opt);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
      ASSERT_LE(r.objective_history[i], r.objective_history[i - 1] * (1 + 1e-12) + 1e-12) << "case " << c;
    for (int l : r.labels) ASSERT_TRUE(l >= 1 && l <= static_cast<int>(opt.k));
  }
}

TEST(Property, CMeansRowsStochasticAndObjectiveDescends) {
  Gen g(107);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t n = g.index(5, 50), d = g.index(1, 3);
    const Matrix pts = g.matrix(n, d);
    CMeansOptions opt;
    opt.k = g.index(1, std::min<std::size_t>(n, 5));
    opt.fuzzifier = g.uniform(1.2, 3.0);
    opt.seed = static_cast<std::uint64_t>(c);
    const auto r = cmeans(pts, opt);
    ASSERT_TRUE(r.memberships.has_value());
    for (Eigen::Index i = 0; i < r.memberships->rows(); ++i) {
      ASSERT_NEAR(r.memberships->row(i).sum(), 1.0, 1e-9);
      ASSERT_GE(r.memberships->row(i).minCoeff(), 0.0);
    }
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
      ASSERT_LE(r.objective_history[i], r.objective_history[i - 1] * (1 + 1e-9) + 1e-12) << "case " << c;
  }
}

TrapFuzzyVector random_fuzzy(Gen& g, std::size_t d, double spread) {
  TrapFuzzyVector v(d);
  const double h = g.uniform(0.05, 1.0);
  for (auto& x : v) {
    x.m1 = g.normal();
    x.m2 = x.m1 + spread * g.uniform();
    x.l = spread * g.uniform();
    x.r = spread * g.uniform();
    x.height = h;
  }
  return v;
}

TEST(Property, FuzzyDistanceMetricLaws) {
  Gen g(108);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t d = g.index(1, 8);
    const auto a = random_fuzzy(g, d, 0.5), b = random_fuzzy(g, d, 0.5);
    const std::size_t levels = g.index(2, 15);
    const double ab = fuzzy_distance(a, b, levels);
    ASSERT_EQ(ab, fuzzy_distance(b, a, levels));
    ASSERT_EQ(fuzzy_distance(a, a, levels), 0.0);
    ASSERT_GE(ab, 0.0);

    auto as = a, bs = b;
    const double shift = g.normal(0.0, 3.0);
    for (auto* v : {&as, &bs})
      for (auto& x : *v) {
        x.m1 += shift;
        x.m2 += shift;
      }
    ASSERT_NEAR(fuzzy_distance(as, bs, levels), ab, 1e-9 * (1 + ab));
  }
}

TEST(Property, FuzzyCrispLimitAndShrinkingSpread) {
  Gen g(109);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t d = g.index(1, 8);
    const auto x = g.vec(d, -3, 3), y = g.vec(d, -3, 3);
    double e = 0.0;
    for (std::size_t j = 0; j < d; ++j) e += (x[j] - y[j]) * (x[j] - y[j]);
    e = std::sqrt(e);
    const double mu = g.uniform(0.1, 1.0);
    const auto crisp = FuzzParams::uniform(d, 0.0, 0.0, 0.0);
    ASSERT_NEAR(fuzzy_distance(fuzzify(x, mu, crisp), fuzzify(y, g.uniform(0.1, 1.0), crisp)), e, 1e-12);

    // Widths scaled by t move the distance by at most t times the width norm.
    const double dc = g.uniform(0, 1), l = g.uniform(0, 1), r = g.uniform(0, 1);
    const double bound = 2.0 * (dc / 2.0 + std::max(l, r)) * std::sqrt(static_cast<double>(d));
    for (double t : {1.0, 0.1, 0.01}) {
      const auto p = FuzzParams::uniform(d, t * dc, t * l, t * r);
      const double f = fuzzy_distance(fuzzify(x, mu, p), fuzzify(y, g.uniform(0.1, 1.0), p));
      ASSERT_LE(std::abs(f - e), t * bound + 1e-12) << "case " << c << " t " << t;
    }
  }
}

TEST(Property, JoinTakesMinimumHeight) {
  Gen g(110);
  for (int c = 0; c < kPropertyCases; ++c) {
    std::vector<TrapFuzzyVector> words(g.index(1, 4));
    const std::size_t dim = g.index(1, 4);
    double lo = 1.0;
    std::size_t total = 0;
    for (auto& w : words) {
      w = random_fuzzy(g, dim, 0.3);
      lo = std::min(lo, w.front().height);
      total += w.size();
    }
    const auto j = join_ngram(words);
    ASSERT_EQ(j.size(), total);
    std::size_t at = 0;
    for (const auto& w : words)
      for (const auto& x : w) {
        ASSERT_EQ(j[at].height, lo);
        ASSERT_EQ(j[at].m1, x.m1);
        ASSERT_EQ(j[at].r, x.r);
        ++at;
      }
  }
}

TEST(Property, SvcInvariantToFeatureScale) {
  Gen g(111);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t n = g.index(6, 30), d = g.index(1, 3);
    std::vector<FeatureRow> rows(n), scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int y = i % 2 ? 1 : -1;
      rows[i] = {std::to_string(i), g.vec(d, -1, 1), y};
      rows[i].features[0] += 0.8 * y;
    }
    std::vector<double> s(d), o(d);
    for (std::size_t j = 0; j < d; ++j) {
      s[j] = std::ldexp(1.0, static_cast<int>(g.index(0, 20)) - 10);  // exact in binary
      o[j] = std::ldexp(std::round(g.normal(0.0, 8.0)), -2);
    }
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = rows[i];
      for (std::size_t j = 0; j < d; ++j) scaled[i].features[j] = rows[i].features[j] * s[j] + o[j];
    }
    TrainOptions opt;
    opt.epochs = 30;
    opt.seed = static_cast<std::uint64_t>(c);
    const auto a = train_svc(rows, opt), b = train_svc(scaled, opt);
    for (std::size_t i = 0; i < n; ++i) {
      const auto pa = predict(a, rows[i].features), pb = predict(b, scaled[i].features);
      ASSERT_NEAR(pa.margin, pb.margin, 1e-6 * (1 + std::abs(pa.margin))) << "case " << c;
      if (std::abs(pa.margin) > 1e-6) ASSERT_EQ(pa.label, pb.label);
    }
  }
}

TEST(Property, ClusterStatsUnderRigidMotionAndScale) {
  Gen g(112);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t n = g.index(6, 60), d = g.index(1, 5);
    const int k = static_cast<int>(g.index(2, 4));
    const Matrix pts = g.matrix(n, d);
    auto labels = random_labels(g, n, k);
    if (g.coin()) labels[0] = 0;  // noise is ignored
    const double base_sd = rmsstd(pts, labels), base_rs = rs(pts, labels);

    const Matrix rot = random_rotation(g, d);
    Matrix moved = pts * rot.transpose();
    const Eigen::RowVectorXd shift = Eigen::RowVectorXd::Random(static_cast<Eigen::Index>(d)) * 10.0;
    moved.rowwise() += shift;
    ASSERT_NEAR(rmsstd(moved, labels), base_sd, 1e-9 * (1 + base_sd)) << "case " << c;
    ASSERT_NEAR(rs(moved, labels), base_rs, 1e-9);

    const double scale = g.uniform(0.01, 100.0);
    const Matrix big = pts * scale;
    ASSERT_NEAR(rmsstd(big, labels), scale * base_sd, 1e-9 * scale * (1 + base_sd));
    ASSERT_NEAR(rs(big, labels), base_rs, 1e-9);
    ASSERT_GE(base_rs, -1e-12);
    ASSERT_LE(base_rs, 1.0 + 1e-12);
  }
}

TEST(Property, RankSumSymmetry) {
  Gen g(113);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t na = g.index(1, 12), nb = g.index(1, 8);
    std::vector<double> a(na), b(nb);
    for (auto& x : a) x = std::round(g.normal(0.0, 3.0));
    for (auto& x : b) x = std::round(g.normal(0.5, 3.0));
    for (auto mode : {PValueMode::exact, PValueMode::normal}) {
      const auto ab = wilcoxon_ranksum(a, b, mode), ba = wilcoxon_ranksum(b, a, mode);
      ASSERT_NEAR(ab.statistic + ba.statistic, static_cast<double>(na * nb), 1e-9);
      ASSERT_NEAR(ab.p_value, ba.p_value, 1e-12) << "case " << c;
      ASSERT_GT(ab.p_value, 0.0);
      ASSERT_LE(ab.p_value, 1.0);
    }
  }
}

TEST(Property, TokenizeIsIdempotent) {
  Gen g(114);
  const std::vector<std::string> pieces{"a", "B", "z", "É", "ß", "ж", "Ω", "9", " ", "  ", ",", ".", "!",
                                        "'", "-", "\t", "\n", "(", ")", "\"", "ü", "Q"};
  for (int c = 0; c < kPropertyCases; ++c) {
    std::string s;
    for (std::size_t i = 0, len = g.index(0, 40); i < len; ++i) s += pieces[g.index(0, pieces.size() - 1)];
    const auto once = tokenize(s);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    ASSERT_EQ(tokenize(joined), once) << "input '" << s << "'";
    for (const auto& t : once) ASSERT_FALSE(t.empty());
  }
}

std::vector<RawDocument> random_docs(Gen& g, std::size_t docs, std::size_t vocab) {
  std::vector<RawDocument> out(docs);
  for (std::size_t i = 0; i < docs; ++i) {
    out[i].id = "d" + std::to_string(i);
    for (std::size_t t = 0, len = g.index(1, 30); t < len; ++t)
      out[i].text += "w" + std::to_string(g.index(0, vocab - 1)) + " ";
  }
  return out;
}

TEST(Property, CountColumnsMatchTokenCounts) {
  Gen g(115);
  for (int c = 0; c < kPropertyCases; ++c) {
    const auto raw = random_docs(g, g.index(1, 6), g.index(1, 12));
    const auto corpus = build_corpus(raw);
    ASSERT_EQ(corpus.counts.cols, raw.size());
    ASSERT_EQ(corpus.counts.rows, corpus.vocab.size());
    for (std::size_t j = 0; j < raw.size(); ++j)
      ASSERT_EQ(corpus.counts.column_sum(j), static_cast<double>(corpus.docs[j].tokens.size()));
  }
}

TEST(Property, SvdIgnoresDocumentOrder) {
  Gen g(116);
  int checked = 0;
  for (int c = 0; c < kPropertyCases; ++c) {
    auto raw = random_docs(g, g.index(4, 7), g.index(4, 9));
    const auto a = build_corpus(raw);
    std::shuffle(raw.begin(), raw.end(), g.engine());
    const auto b = build_corpus(raw);
    ASSERT_EQ(a.vocab.terms(), b.vocab.terms());
    SvdOptions opt;
    opt.rank = 3;
    opt.seed = static_cast<std::uint64_t>(c);
    const auto ea = svd_embed(a.counts, opt), eb = svd_embed(b.counts, opt);
    ASSERT_EQ(ea.dim, eb.dim);
    ASSERT_LT((ea.singular_values - eb.singular_values).norm(), 1e-9 * (1 + ea.singular_values.norm()));
    // Vectors are only pinned down when the kept singular values are distinct.
    SvdOptions full = opt;
    full.rank = 16;
    const Vector sv = svd_embed(a.counts, full).singular_values;
    const auto kept = static_cast<Eigen::Index>(ea.dim);
    bool distinct = sv(kept - 1) > 1e-6;
    for (Eigen::Index i = 1; i <= kept && i < sv.size(); ++i) distinct &= sv(i - 1) - sv(i) > 1e-3 * sv(0);
    if (!distinct) continue;
    ++checked;
    ASSERT_LT((ea.vectors - eb.vectors).norm(), 1e-6 * (1 + ea.vectors.norm())) << "case " << c;
  }
  EXPECT_GT(checked, kPropertyCases / 4);
}

TEST(Property, WishartIgnoresPointOrder) {
  Gen g(117);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t per = g.index(4, 15);
    std::vector<std::vector<double>> centers{{0, 0}, {g.uniform(2, 6), 0}, {0, g.uniform(2, 6)}};
    const Matrix pts = testing::blobs(g, centers, per, g.uniform(0.1, 0.8), nullptr);
    const auto n = static_cast<std::size_t>(pts.rows());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.engine());
    WishartOptions opt;
    opt.k_neighbors = g.index(2, 5);
    opt.h = g.uniform(0.0, 4.0);
    opt.dim = 2;
    // Points sharing a k-NN radius keep their original relative order.
    const auto radius = kernels::serial::kth_neighbor_distance(kernels::serial::euclidean_distances(pts),
                                                               opt.k_neighbors);
    std::map<double, std::vector<std::size_t>> slots;
    for (std::size_t i = 0; i < n; ++i) slots[radius[perm[i]]].push_back(i);
    for (auto& [r, pos] : slots) {
      std::vector<std::size_t> members;
      for (std::size_t q : pos) members.push_back(perm[q]);
      std::sort(members.begin(), members.end());
      for (std::size_t q = 0; q < pos.size(); ++q) perm[pos[q]] = members[q];
    }
    Matrix shuffled(pts.rows(), pts.cols());
    for (std::size_t i = 0; i < n; ++i) shuffled.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(perm[i]));
    const auto a = wishart(kernels::serial::euclidean_distances(pts), opt);
    const auto b = wishart(kernels::serial::euclidean_distances(shuffled), opt);
    std::vector<int> back(n);
    for (std::size_t i = 0; i < n; ++i) back[perm[i]] = b.labels[i];
    ASSERT_EQ(rand_index(a.labels, back), 1.0) << "case " << c;
    ASSERT_EQ(a.k_found, b.k_found);
  }
}

}  // namespace
}  // namespace spotbot
