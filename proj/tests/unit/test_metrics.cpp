#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "spotbot/metrics.hpp"
#include "test_util.hpp"

namespace spotbot {
namespace {

Matrix col(std::vector<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

TEST(Rmsstd, Examples) {
  EXPECT_NEAR(rmsstd(col({0, 2}), std::vector<int>{1, 1}), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(rmsstd(col({3, 3, 7, 7}), std::vector<int>{1, 1, 2, 2}), 0.0);
  const double one = rmsstd(col({0, 2}), std::vector<int>{1, 1});
  EXPECT_NEAR(rmsstd(col({0, 2, -2, 0}), std::vector<int>{1, 1, 2, 2}), one, 1e-15);
}

TEST(Rmsstd, HandComputed2D) {
  // Cluster A: (0,0),(2,0),(1,3): mean (1,1), SS = 1+1+1+1+0+4 = 8.
  // Cluster B: (5,5),(5,7): SS = 2. Noise point ignored.
  Matrix p(6, 2);
  p << 0, 0, 2, 0, 1, 3, 5, 5, 5, 7, 100, 100;
  const std::vector<int> l{1, 1, 1, 2, 2, 0};
  EXPECT_NEAR(rmsstd(p, l), std::sqrt(10.0 / (2.0 * 3.0)), 1e-15);
}

TEST(Rmsstd, AllSingletonsIsError) {
  EXPECT_THROW(rmsstd(col({0, 1, 2}), std::vector<int>{1, 2, 3}), ValidationError);
  EXPECT_THROW(rmsstd(col({0, 1}), std::vector<int>{0, 0}), ValidationError);
  EXPECT_THROW(rmsstd(col({0, 1}), std::vector<int>{1}), ValidationError);
}

TEST(Rs, Examples) {
  EXPECT_NEAR(rs(col({0, 1, 5}), std::vector<int>{1, 1, 1}), 0.0, 1e-15);
  EXPECT_NEAR(rs(col({1, 1, 4, 4}), std::vector<int>{1, 1, 2, 2}), 1.0, 1e-15);
  // SSW = 2 + 2 (one unit each way around both means), SST = 36 + 16 + 16 + 36.
  EXPECT_NEAR(rs(col({0, 2, 10, 12}), std::vector<int>{1, 1, 2, 2}), 1.0 - 4.0 / 104.0, 1e-12);
  EXPECT_THROW(rs(col({3, 3}), std::vector<int>{1, 2}), ValidationError);
}

TEST(Intercluster, Examples) {
  Matrix two(2, 2);
  two << 0, 0, 3, 4;
  auto s = intercluster(two);
  EXPECT_DOUBLE_EQ(s.avg, 5.0);
  EXPECT_DOUBLE_EQ(s.min, 5.0);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
  Matrix tri(3, 2);
  tri << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2.0;
  s = intercluster(tri);
  EXPECT_NEAR(s.avg, 1.0, 1e-15);
  EXPECT_NEAR(s.min, 1.0, 1e-15);
  EXPECT_NEAR(s.max, 1.0, 1e-15);
  s = intercluster(col({0, 1, 3}));
  EXPECT_DOUBLE_EQ(s.avg, 2.0);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 3.0);
  EXPECT_FALSE(s.degenerate);
}

TEST(Intercluster, DegenerateGivesZeros) {
  const auto s = intercluster(col({4}));
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.avg, 0.0);
  EXPECT_EQ(s.max, 0.0);
}

TEST(Intercluster, FromLabelsAndLinkages) {
  const Matrix p = col({0, 2, 10, 14, 50});
  const std::vector<int> l{1, 1, 2, 2, 0};
  auto s = intercluster(p, l, Linkage::centroid);
  EXPECT_DOUBLE_EQ(s.avg, 11.0);
  s = intercluster(p, l, Linkage::single);
  EXPECT_DOUBLE_EQ(s.avg, 8.0);
  s = intercluster(p, l, Linkage::complete);
  EXPECT_DOUBLE_EQ(s.avg, 14.0);
  EXPECT_THROW(parse_linkage("ward"), ValidationError);
}

TEST(ClusterStats, FlagsUndefinedValues) {
  const auto s = cluster_stats(col({0, 5, 9}), std::vector<int>{1, 2, 0});
  EXPECT_FALSE(s.rmsstd_defined);
  EXPECT_NEAR(s.noise_ratio, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.inter.avg, 5.0);
  const auto t = cluster_stats(col({0, 2, 10, 12}), std::vector<int>{1, 1, 2, 2});
  EXPECT_TRUE(t.rmsstd_defined);
  EXPECT_TRUE(t.rs_defined);
  EXPECT_LE(t.inter.min, t.inter.avg);
  EXPECT_LE(t.inter.avg, t.inter.max);
}

TEST(NoiseRatio, Exact) {
  EXPECT_DOUBLE_EQ(noise_ratio(std::vector<int>{0, 1, 0, 2}), 0.5);
  EXPECT_DOUBLE_EQ(noise_ratio(std::vector<int>{1, 1}), 0.0);
}

// Two-sided p by listing every split of the pooled sample.
double enumerate_ranksum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), na = a.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (double y : pooled) {
      less += y < pooled[i];
      equal += y == pooled[i];
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < na; ++i) observed += rank[i];
  const double mu = static_cast<double>(na) * static_cast<double>(n + 1) / 2.0;
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

TEST(RankSum, SeparatedThreeVersusThree) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = wilcoxon_ranksum(a, b, PValueMode::exact);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_value, 0.1, 1e-15);
}

TEST(RankSum, IdenticalSamples) {
  const std::vector<double> a{1, 4, 4, 9}, b{9, 4, 1, 4};
  EXPECT_DOUBLE_EQ(wilcoxon_ranksum(a, b, PValueMode::exact).p_value, 1.0);
  EXPECT_DOUBLE_EQ(wilcoxon_ranksum(a, b, PValueMode::normal).p_value, 1.0);
}

TEST(RankSum, MatchesScipyReferences) {
  const std::vector<double> a{1.1, 2.3, 0.4, 5.6, 3.3}, b{4.4, 6.1, 7.0, 2.9, 8.2};
  EXPECT_NEAR(wilcoxon_ranksum(a, b, PValueMode::exact).p_value, 0.05555555555555555, 1e-15);
  const std::vector<double> a8{0.3, 1.2, 2.2, 2.2, 3.1, 4.0, 4.0, 5.5}, b8{1.0, 2.2, 3.5, 4.0, 6.1, 6.6, 7.2, 8.0};
  const auto r = wilcoxon_ranksum(a8, b8, PValueMode::normal);
  EXPECT_DOUBLE_EQ(r.statistic, 17.0);
  EXPECT_NEAR(r.p_value, 0.1255614075483197, 1e-12);
}

TEST(RankSum, ExactMatchesEnumerationWithTies) {
  testing::Gen g(99);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = std::round(g.uniform(0, 6));
    for (auto& x : b) x = std::round(g.uniform(0, 6));
    EXPECT_NEAR(wilcoxon_ranksum(a, b, PValueMode::exact).p_value, enumerate_ranksum_p(a, b), 1e-12);
  }
}

TEST(RankSum, Errors) {
  const std::vector<double> empty, one{1.0}, twenty(11, 0.5);
  EXPECT_THROW(wilcoxon_ranksum(empty, one), ValidationError);
  EXPECT_THROW(wilcoxon_ranksum(twenty, twenty, PValueMode::exact), ValidationError);
  EXPECT_THROW(parse_pvalue_mode("bootstrap"), ValidationError);
}

TEST(SignedRank, MatchesScipyReference) {
  const std::vector<double> d{0.5, -1.2, 2.0, 3.1, -0.4, 1.7, 2.2};
  const std::vector<double> zero(d.size(), 0.0);
  EXPECT_NEAR(wilcoxon_signed_rank(d, zero, PValueMode::exact).p_value, 0.109375, 1e-15);
  EXPECT_THROW(wilcoxon_signed_rank(d, std::vector<double>{1.0}), ValidationError);
}

}  // namespace
}  // namespace spotbot
