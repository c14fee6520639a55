#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "spotbot/corpus.hpp"
#include "spotbot/types.hpp"

namespace spotbot {

enum class EmbeddingSource { svd, external };
enum class Weighting { raw, log1p };

Weighting parse_weighting(std::string_view text);

struct EmbeddingTable {
  std::size_t dim = 0;
  Matrix vectors;  // V x dim
  EmbeddingSource source = EmbeddingSource::svd;
  Vector singular_values;       // svd only
  bool rank_clamped = false;    // requested rank exceeded the numerical rank
  std::size_t covered = 0;      // external only: vocab tokens found in the file
  std::size_t vocab_size = 0;

  double coverage() const {
    return vocab_size == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(vocab_size);
  }
};

struct SvdOptions {
  std::size_t rank = 8;
  Weighting weighting = Weighting::log1p;
  std::uint64_t seed = 0;
  std::size_t oversampling = 10;
  std::size_t power_iterations = 4;
};

struct TruncatedSvd {
  Matrix u;      // rows x r, orthonormal columns
  Vector sigma;  // r, non-increasing
  Matrix v;      // cols x r
  bool rank_clamped = false;
};

/// Randomized subspace iteration on the weighted count matrix. Each left
/// singular vector is signed so its largest-magnitude entry is non-negative.
TruncatedSvd randomized_svd(const SparseCounts& counts, const SvdOptions& options);

/// Word vectors are the rows of U_d * Sigma_d.
EmbeddingTable svd_embed(const SparseCounts& counts, const SvdOptions& options);

/// Plain-text vector format: header "V d", then "token v1 ... vd" per line.
/// Vocabulary tokens absent from the file get the zero vector.
EmbeddingTable parse_embeddings(std::istream& in, const Vocabulary& vocab);
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab);
void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab,
                     const std::filesystem::path& path);

struct SemanticPath {
  std::string doc_id;
  Label label = Label::unlabeled;
  std::size_t n = 1;         // n-gram length
  std::size_t word_dim = 0;  // embedding dimension d
  Matrix points;             // L x (n * d)
  Matrix word_mu;            // L x n, per-word frequency ratio n_w / max n_w in the source text
  std::vector<TokenId> grams;  // L * n token ids

  std::size_t length() const noexcept { return static_cast<std::size_t>(points.rows()); }
};

/// Row t is the concatenation of the vectors of the n words of gram t.
SemanticPath build_path(const TokenDoc& doc, const EmbeddingTable& table, std::size_t n,
                        std::size_t stride = 1);

/// Paths stored as `paths.bin` (row-major float64, little-endian, all paths
/// back to back), `mu.bin` (per-word heights, same layout with n columns) and
/// `paths.json` describing dims, ids, labels and row offsets.
void save_paths(const std::vector<SemanticPath>& paths, const std::filesystem::path& dir);
std::vector<SemanticPath> load_paths(const std::filesystem::path& dir);

}  // namespace spotbot
