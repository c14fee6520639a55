#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spotbot/types.hpp"

namespace spotbot {

enum class Label { human, bot_simple, bot_advanced, unlabeled };

std::string_view to_string(Label label);
/// Accepts "human", "bot-simple", "bot-advanced", "unlabeled".
Label parse_label(std::string_view text);

struct TokenizerConfig {
  bool lowercase = true;
  bool strip_punctuation = true;
  /// Input is already tokenized: split on whitespace only, no folding or stripping.
  bool pretokenized = false;
};

/// Splits UTF-8 text on Unicode whitespace. Punctuation code points are removed
/// from inside tokens and tokens that end up empty are dropped. Throws
/// IngestError with the byte offset of the first invalid UTF-8 sequence.
std::vector<std::string> tokenize(std::string_view raw_text, const TokenizerConfig& rules = {});

struct TokenDoc {
  std::string id;
  std::vector<TokenId> tokens;
  Label label = Label::unlabeled;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  std::size_t size() const noexcept { return terms_.size(); }
  const std::string& term(TokenId id) const { return terms_.at(id); }
  /// Returns size() when the term is unknown.
  TokenId find(std::string_view term) const;
  bool contains(std::string_view term) const { return find(term) != size(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Term x document count matrix in compressed-column form.
struct SparseCounts {
  std::size_t rows = 0;  // terms
  std::size_t cols = 0;  // documents
  std::vector<std::size_t> col_ptr;  // cols + 1 entries
  std::vector<TokenId> row_index;    // sorted within each column
  std::vector<double> values;

  std::size_t nonzeros() const noexcept { return values.size(); }
  double column_sum(std::size_t col) const;
  Matrix to_dense() const;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<TokenDoc> docs;
  SparseCounts counts;
};

struct RawDocument {
  std::string id;
  std::string text;
  Label label = Label::unlabeled;
};

/// Tokenizes every document, builds a frequency-sorted vocabulary (count
/// descending, then term ascending), drops terms below `min_count` and fills
/// the count matrix.
Corpus build_corpus(std::span<const RawDocument> raw, const TokenizerConfig& rules = {},
                    std::size_t min_count = 1);

/// Every `*.txt` file in `dir` (sorted by name), id = file stem, unlabeled.
std::vector<RawDocument> read_text_directory(const std::filesystem::path& dir);
/// JSON array of {"id", "path", "label"}; relative paths resolve against the
/// manifest's directory.
std::vector<RawDocument> read_manifest(const std::filesystem::path& manifest);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

struct NGramStream {
  std::size_t n = 1;
  std::size_t stride = 1;
  std::vector<TokenId> flat;  // size() * n token ids, gram-major

  std::size_t size() const noexcept { return n == 0 ? 0 : flat.size() / n; }
  std::span<const TokenId> gram(std::size_t i) const {
    return std::span<const TokenId>(flat).subspan(i * n, n);
  }
};

/// Number of windows of length n stepped by stride over `length` tokens.
std::size_t ngram_count(std::size_t length, std::size_t n, std::size_t stride);

NGramStream extract_ngrams(const TokenDoc& doc, std::size_t n, std::size_t stride = 1);

/// count_j / total for every token present in the document.
std::map<TokenId, double> normalized_frequencies(const TokenDoc& doc);

}  // namespace spotbot
