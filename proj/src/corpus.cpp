#include "spotbot/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include "json.hpp"
#include "spotbot/io.hpp"

namespace spotbot {

namespace {

using nlohmann::json;

// Decodes one code point starting at `pos`; returns the sequence length or 0
// on an invalid sequence (overlong forms, surrogates, and > U+10FFFF rejected).
std::size_t decode_utf8(std::string_view s, std::size_t pos, char32_t& cp) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  const unsigned char b0 = byte(pos);
  std::size_t len = 0;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (pos + len > s.size()) return 0;
  for (std::size_t i = 1; i < len; ++i) {
    const unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000 || cp == 0xFEFF;
}

bool is_punctuation(char32_t cp) {
  if (cp < 0x80)
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  switch (cp) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x37E: case 0x387: case 0x55D: case 0x589: case 0x5BE: case 0x60C: case 0x61B:
    case 0x61F: case 0x6D4:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x2E00 && cp <= 0x2E4F) || (cp >= 0x3001 && cp <= 0x3003) ||
         (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0x3014 && cp <= 0x301F) ||
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65);
}

// Simple case folding for Latin, Greek and Cyrillic blocks.
char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
  if (cp >= 0x100 && cp <= 0x17F) {
    if (cp == 0x130) return 'i';
    if (cp == 0x178) return 0xFF;
    const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    if (odd_upper) return (cp & 1) ? cp + 1 : cp;
    if (cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
    return (cp & 1) ? cp : cp + 1;
  }
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x1E00 && cp <= 0x1EFF) {
    if (cp >= 0x1E96 && cp <= 0x1E9F) return cp;
    return (cp & 1) ? cp : cp + 1;
  }
  return cp;
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::human: return "human";
    case Label::bot_simple: return "bot-simple";
    case Label::bot_advanced: return "bot-advanced";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label parse_label(std::string_view text) {
  if (text == "human") return Label::human;
  if (text == "bot-simple" || text == "bot") return Label::bot_simple;
  if (text == "bot-advanced") return Label::bot_advanced;
  if (text == "unlabeled" || text.empty()) return Label::unlabeled;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

std::vector<std::string> tokenize(std::string_view raw, const TokenizerConfig& rules) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  std::size_t pos = 0;
  while (pos < raw.size()) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(raw, pos, cp);
    if (len == 0)
      throw IngestError("invalid UTF-8 at byte offset " + std::to_string(pos), pos);
    pos += len;
    if (is_space(cp)) {
      flush();
      continue;
    }
    if (!rules.pretokenized) {
      if (rules.strip_punctuation && is_punctuation(cp)) continue;
      if (rules.lowercase) cp = to_lower(cp);
    }
    append_utf8(current, cp);
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], static_cast<TokenId>(i)).second)
      throw ValidationError("duplicate vocabulary term '" + terms_[i] + "'");
  }
}

TokenId Vocabulary::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? static_cast<TokenId>(terms_.size()) : it->second;
}

double SparseCounts::column_sum(std::size_t col) const {
  double s = 0.0;
  for (std::size_t k = col_ptr[col]; k < col_ptr[col + 1]; ++k) s += values[k];
  return s;
}

Matrix SparseCounts::to_dense() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t k = col_ptr[j]; k < col_ptr[j + 1]; ++k)
      out(row_index[k], static_cast<Eigen::Index>(j)) = values[k];
  return out;
}

namespace {

SparseCounts count_matrix(std::size_t vocab_size, const std::vector<TokenDoc>& docs) {
  SparseCounts counts;
  counts.rows = vocab_size;
  counts.cols = docs.size();
  counts.col_ptr.reserve(docs.size() + 1);
  counts.col_ptr.push_back(0);
  for (const auto& doc : docs) {
    std::map<TokenId, std::size_t> column;
    for (TokenId t : doc.tokens) ++column[t];
    for (const auto& [term, c] : column) {
      counts.row_index.push_back(term);
      counts.values.push_back(static_cast<double>(c));
    }
    counts.col_ptr.push_back(counts.values.size());
  }
  return counts;
}

}  // namespace

Corpus build_corpus(std::span<const RawDocument> raw, const TokenizerConfig& rules,
                    std::size_t min_count) {
  if (min_count == 0) min_count = 1;
  std::vector<std::vector<std::string>> tokenized(raw.size());
  // Documents are independent; the first bad document by position is reported.
  std::vector<std::optional<IngestError>> errors(raw.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(raw.size()); ++i) {
    try {
      tokenized[i] = tokenize(raw[i].text, rules);
    } catch (const IngestError& e) {
      errors[i].emplace(raw[i].id + ": " + e.what(), e.byte_offset());
    }
  }
  for (const auto& err : errors)
    if (err) throw *err;

  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& toks : tokenized)
    for (const auto& t : toks) ++freq[t];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& [term, c] : freq)
    if (c >= min_count) ranked.emplace_back(term, c);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> terms;
  terms.reserve(ranked.size());
  for (auto& [term, c] : ranked) terms.push_back(term);

  Corpus corpus;
  corpus.vocab = Vocabulary(std::move(terms));
  std::unordered_map<std::string, std::size_t> seen_ids;
  corpus.docs.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!seen_ids.emplace(raw[i].id, i).second)
      throw ValidationError("duplicate document id '" + raw[i].id + "'");
    TokenDoc doc;
    doc.id = raw[i].id;
    doc.label = raw[i].label;
    doc.tokens.reserve(tokenized[i].size());
    for (const auto& t : tokenized[i]) {
      const TokenId id = corpus.vocab.find(t);
      if (id != corpus.vocab.size()) doc.tokens.push_back(id);
    }
    corpus.docs.push_back(std::move(doc));
  }
  corpus.counts = count_matrix(corpus.vocab.size(), corpus.docs);
  return corpus;
}

std::vector<RawDocument> read_text_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ValidationError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RawDocument> docs;
  for (const auto& f : files) docs.push_back({f.stem().string(), io::read_file(f), Label::unlabeled});
  return docs;
}

std::vector<RawDocument> read_manifest(const std::filesystem::path& manifest) {
  json j;
  try {
    j = json::parse(io::read_file(manifest));
  } catch (const json::parse_error& e) {
    throw ValidationError(manifest.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ValidationError(manifest.string() + ": manifest must be a JSON array");
  const auto base = manifest.parent_path();
  std::vector<RawDocument> docs;
  for (const auto& entry : j) {
    if (!entry.contains("id") || !entry.contains("path"))
      throw ValidationError(manifest.string() + ": entry without id/path");
    std::filesystem::path p = entry.at("path").get<std::string>();
    if (p.is_relative()) p = base / p;
    RawDocument doc;
    doc.id = entry.at("id").get<std::string>();
    doc.label = parse_label(entry.value("label", std::string("unlabeled")));
    doc.text = io::read_file(p);
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  json j;
  j["format"] = "spotbot-corpus";
  j["version"] = 1;
  j["vocab"] = corpus.vocab.terms();
  json docs = json::array();
  for (const auto& d : corpus.docs)
    docs.push_back({{"id", d.id}, {"label", std::string(to_string(d.label))}, {"tokens", d.tokens}});
  j["docs"] = std::move(docs);
  j["counts"] = {{"rows", corpus.counts.rows},
                 {"cols", corpus.counts.cols},
                 {"col_ptr", corpus.counts.col_ptr},
                 {"row_index", corpus.counts.row_index},
                 {"values", corpus.counts.values}};
  io::write_file(path, j.dump());
}

Corpus load_corpus(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "spotbot-corpus")
    throw ValidationError(path.string() + ": not a spotbot corpus file");
  Corpus corpus;
  corpus.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
  for (const auto& d : j.at("docs")) {
    TokenDoc doc;
    doc.id = d.at("id").get<std::string>();
    doc.label = parse_label(d.at("label").get<std::string>());
    doc.tokens = d.at("tokens").get<std::vector<TokenId>>();
    for (TokenId t : doc.tokens)
      if (t >= corpus.vocab.size())
        throw ValidationError(path.string() + ": token index out of range in " + doc.id);
    corpus.docs.push_back(std::move(doc));
  }
  corpus.counts = count_matrix(corpus.vocab.size(), corpus.docs);
  return corpus;
}

std::size_t ngram_count(std::size_t length, std::size_t n, std::size_t stride) {
  if (n == 0 || stride == 0 || length < n) return 0;
  return (length - n) / stride + 1;
}

NGramStream extract_ngrams(const TokenDoc& doc, std::size_t n, std::size_t stride) {
  if (n == 0 || stride == 0) throw ValidationError("n-gram length and stride must be >= 1");
  NGramStream out;
  out.n = n;
  out.stride = stride;
  const std::size_t count = ngram_count(doc.tokens.size(), n, stride);
  out.flat.reserve(count * n);
  for (std::size_t g = 0; g < count; ++g)
    for (std::size_t i = 0; i < n; ++i) out.flat.push_back(doc.tokens[g * stride + i]);
  return out;
}

std::map<TokenId, double> normalized_frequencies(const TokenDoc& doc) {
  if (doc.tokens.empty()) throw ValidationError("normalized_frequencies: empty document " + doc.id);
  std::map<TokenId, std::size_t> counts;
  for (TokenId t : doc.tokens) ++counts[t];
  std::map<TokenId, double> out;
  const double total = static_cast<double>(doc.tokens.size());
  for (const auto& [t, c] : counts) out.emplace(t, static_cast<double>(c) / total);
  return out;
}

}  // namespace spotbot
