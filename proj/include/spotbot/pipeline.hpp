#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spotbot/classify.hpp"
#include "spotbot/cluster.hpp"
#include "spotbot/corpus.hpp"
#include "spotbot/ecplane.hpp"
#include "spotbot/embed.hpp"
#include "spotbot/markov.hpp"
#include "spotbot/io.hpp"
#include "spotbot/metrics.hpp"

namespace spotbot {

struct ClusterConfig {
  Algorithm algo = Algorithm::kmeans;
  std::size_t k = 8;
  std::size_t k_neighbors = 8;
  double h = 0.0;
  double fuzzifier = 2.0;
  // Fuzzification; unset widths default to 0.1 * per-dimension stddev.
  std::optional<double> delta_c;
  std::optional<double> l;
  std::optional<double> r;
  std::size_t alpha_levels = kDefaultAlphaLevels;
  Linkage linkage = Linkage::centroid;
  /// Per-text cap on clustered path points (evenly spaced subsample); 0 = all.
  std::size_t sample = 100000;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> manifests;
  std::vector<std::filesystem::path> input_dirs;
  TokenizerConfig tokenizer;
  std::size_t min_count = 1;

  // Bot stand-in generated from the human texts, one per human text, matched length.
  std::size_t markov_order = 2;
  MarkovUnit markov_unit = MarkovUnit::character;
  bool generate_bots = true;

  std::string embedding_method = "svd";
  std::size_t embedding_dim = 8;
  Weighting weighting = Weighting::log1p;
  std::filesystem::path vectors_file;

  std::size_t ngram_n = 1;
  std::size_t ngram_stride = 1;

  bool ec_features = true;
  bool cluster_features = true;
  SweepOptions ec;
  ClusterConfig cluster;

  std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2};
  std::size_t folds = 5;
  std::size_t epochs = 200;
  double test_fraction = 0.2;

  std::uint64_t seed = 7;
  std::size_t jobs = 0;  // 0 = OpenMP default
  std::filesystem::path out_dir = "spotbot_run";
  bool use_cache = true;
};

/// Plain-text config: one `key = value` per line, `#` comments. Keys mirror
/// the CLI flags, e.g. `embedding.dim = 8`, `ec.n = 3..6`.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Applies one `key = value` override.
void apply_config_value(PipelineConfig& config, std::string_view key, std::string_view value,
                        const std::filesystem::path& base_dir = {});
/// Range and existence checks; throws ValidationError before any compute.
void validate_config(const PipelineConfig& config);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
  bool cached = false;
};

struct EcCellResult {
  std::size_t m = 0;
  std::size_t n = 0;
  double cv_mean = 0.0;
  double cv_sd = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double best_lambda = 0.0;
  bool skipped = false;
  std::string reason;
};

struct RunReport {
  std::vector<StageTiming> timings;
  std::map<std::string, std::string> file_hashes;  // relative output path -> hash
  std::vector<EcCellResult> ec_cells;
  std::optional<EcCellResult> best_ec_cell;
  std::optional<TestResult> rmsstd_test;  // human vs bot rank-sum
  double human_rmsstd_median = 0.0;
  double bot_rmsstd_median = 0.0;
  std::optional<SplitReport> cluster_classification;
  std::size_t human_texts = 0;
  std::size_t bot_texts = 0;
};

/// Runs ingest -> (gen-markov) -> embed -> path -> {EC sweep + classify,
/// per-text clustering + stats + rank-sum + classify} and writes every
/// intermediate into config.out_dir together with report.json.
RunReport run_pipeline(const PipelineConfig& config);

std::string run_report_json(const RunReport& report);

// Stage helpers shared with the CLI.

Clustering cluster_path(const SemanticPath& path, const ClusterConfig& config, std::uint64_t seed);

/// Per-text cluster statistics rows for stats.csv.
struct StatsRow {
  std::string doc_id;
  Label label = Label::unlabeled;
  std::string algo;
  std::string params;
  ClusterStats stats;
};

std::string stats_csv(const std::vector<StatsRow>& rows);
std::string ec_csv(std::span<const TextEC> points);
std::string sweep_csv(std::span<const SweepRow> rows);
std::string boundaries_csv(const BoundaryCurves& curves, std::size_t samples);

/// Plot-ready CSV for the figure analogs: "ec-scatter", "boundaries",
/// "noise-ratio", "sweep-heatmap".
std::string emit_plot_data(std::string_view kind, const std::filesystem::path& input);

/// Feature rows from ec.csv for one (m, n) cell; labels looked up by doc id.
std::vector<FeatureRow> ec_feature_rows(const io::CsvTable& ec, std::size_t m, std::size_t n,
                                        const std::map<std::string, Label>& labels);
std::vector<FeatureRow> cluster_feature_rows(const io::CsvTable& stats,
                                             const std::map<std::string, Label>& labels);
std::string features_csv(std::span<const FeatureRow> rows, std::span<const std::string> names);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path,
                                          std::vector<std::string>* names = nullptr);

/// +1 for human, -1 for every bot label; unlabeled throws.
int class_of(Label label);

}  // namespace spotbot
