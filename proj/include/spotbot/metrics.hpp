#pragma once

#include <span>
#include <string_view>

#include "spotbot/types.hpp"

namespace spotbot {

// Noise points (label 0) are excluded from every statistic in this header.

/// sqrt( SSW / (d * sum_c (n_c - 1)) ).
double rmsstd(const Matrix& points, std::span<const int> labels);

/// (SST - SSW) / SST over non-noise points.
double rs(const Matrix& points, std::span<const int> labels);

double noise_ratio(std::span<const int> labels);

/// Mean of the members of each non-noise cluster, rows in ascending label order.
Matrix member_centroids(const Matrix& points, std::span<const int> labels);

struct InterclusterStats {
  double avg = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;  // fewer than two clusters; all fields zero
};

enum class Linkage { centroid, single, complete };
Linkage parse_linkage(std::string_view text);

/// Distances over all unordered centroid pairs.
InterclusterStats intercluster(const Matrix& centroids);
/// Centroid linkage uses member means; single/complete use nearest/farthest member pairs.
InterclusterStats intercluster(const Matrix& points, std::span<const int> labels,
                               Linkage linkage = Linkage::centroid);

struct ClusterStats {
  double rmsstd = 0.0;
  double rs = 0.0;
  double noise_ratio = 0.0;
  InterclusterStats inter;
  bool rmsstd_defined = true;
  bool rs_defined = true;
};

/// All of the above; undefined rmsstd/rs are reported as flags instead of throwing.
ClusterStats cluster_stats(const Matrix& points, std::span<const int> labels,
                           Linkage linkage = Linkage::centroid);

enum class PValueMode { exact, normal };
PValueMode parse_pvalue_mode(std::string_view text);

struct TestResult {
  double statistic = 0.0;  // U of the first sample (rank-sum) or W+ (signed-rank)
  double p_value = 1.0;    // two-sided
};

/// Mann-Whitney / Wilcoxon rank-sum test with midranks for ties. Exact mode
/// enumerates every split of the pooled ranks (n_a + n_b <= 20); normal mode
/// uses the tie-corrected variance with continuity correction.
TestResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b,
                            PValueMode mode = PValueMode::normal);

/// Paired signed-rank variant; zero differences are dropped. Exact mode
/// enumerates every sign assignment (<= 20 non-zero pairs).
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                PValueMode mode = PValueMode::normal);

inline constexpr std::size_t kExactTestLimit = 20;

}  // namespace spotbot
