#include "spotbot/embed.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "spotbot/io.hpp"

namespace spotbot {

Weighting parse_weighting(std::string_view text) {
  if (text == "raw") return Weighting::raw;
  if (text == "log" || text == "log1p") return Weighting::log1p;
  throw ValidationError("unknown weighting '" + std::string(text) + "' (raw|log1p)");
}

namespace {

// Weighted count matrix held in both compressed orientations.
struct WeightedMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::size_t> col_ptr, row_ptr;
  std::vector<TokenId> row_index;
  std::vector<std::size_t> col_index;
  std::vector<double> csc_values, csr_values;

  WeightedMatrix(const SparseCounts& counts, Weighting w) : rows(counts.rows), cols(counts.cols) {
    col_ptr = counts.col_ptr;
    row_index = counts.row_index;
    csc_values.reserve(counts.values.size());
    for (double v : counts.values) csc_values.push_back(w == Weighting::log1p ? std::log1p(v) : v);

    row_ptr.assign(rows + 1, 0);
    for (TokenId r : row_index) ++row_ptr[r + 1];
    for (std::size_t i = 0; i < rows; ++i) row_ptr[i + 1] += row_ptr[i];
    col_index.resize(row_index.size());
    csr_values.resize(row_index.size());
    std::vector<std::size_t> fill(row_ptr.begin(), row_ptr.end() - 1);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t k = col_ptr[j]; k < col_ptr[j + 1]; ++k) {
        const std::size_t dst = fill[row_index[k]]++;
        col_index[dst] = j;
        csr_values[dst] = csc_values[k];
      }
    }
  }

  // A * X, X is cols x l.
  Matrix times(const Matrix& x) const {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(rows), x.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        y.row(i) += csr_values[k] * x.row(static_cast<Eigen::Index>(col_index[k]));
    return y;
  }

  // A^T * X, X is rows x l.
  Matrix transpose_times(const Matrix& x) const {
    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(cols), x.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cols); ++j)
      for (std::size_t k = col_ptr[j]; k < col_ptr[j + 1]; ++k)
        z.row(j) += csc_values[k] * x.row(row_index[k]);
    return z;
  }
};

Matrix orthonormal_basis(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix thin = Matrix::Identity(y.rows(), y.cols());
  return qr.householderQ() * thin;
}

}  // namespace

TruncatedSvd randomized_svd(const SparseCounts& counts, const SvdOptions& options) {
  if (counts.rows == 0 || counts.cols == 0 || counts.nonzeros() == 0)
    throw ValidationError("svd_embed: empty count matrix");
  if (options.rank == 0) throw ValidationError("svd_embed: rank must be >= 1");

  const WeightedMatrix a(counts, options.weighting);
  const std::size_t full = std::min(a.rows, a.cols);
  TruncatedSvd out;
  std::size_t rank = options.rank;
  if (rank > full) {
    rank = full;
    out.rank_clamped = true;
  }
  const std::size_t sketch = std::min(rank + options.oversampling, full);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix omega(static_cast<Eigen::Index>(a.cols), static_cast<Eigen::Index>(sketch));
  for (Eigen::Index i = 0; i < omega.rows(); ++i)
    for (Eigen::Index j = 0; j < omega.cols(); ++j) omega(i, j) = normal(rng);

  Matrix q = orthonormal_basis(a.times(omega));
  for (std::size_t it = 0; it < options.power_iterations; ++it) {
    const Matrix qz = orthonormal_basis(a.transpose_times(q));
    q = orthonormal_basis(a.times(qz));
  }
  // B = Q^T A, kept transposed (cols x sketch).
  const Matrix bt = a.transpose_times(q);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(bt.transpose()),
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();

  const double tol = static_cast<double>(std::max(a.rows, a.cols)) *
                     std::numeric_limits<double>::epsilon() * (s.size() ? s(0) : 0.0);
  std::size_t numerical_rank = 0;
  while (numerical_rank < static_cast<std::size_t>(s.size()) && s(numerical_rank) > tol)
    ++numerical_rank;
  if (rank > numerical_rank) {
    rank = std::max<std::size_t>(numerical_rank, 1);
    out.rank_clamped = true;
  }

  const auto r = static_cast<Eigen::Index>(rank);
  out.u = q * svd.matrixU().leftCols(r);
  out.sigma = s.head(r);
  out.v = svd.matrixV().leftCols(r);
  for (Eigen::Index c = 0; c < r; ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < out.u.rows(); ++i) {
      if (std::abs(out.u(i, c)) > best) {
        best = std::abs(out.u(i, c));
        arg = i;
      }
    }
    if (out.u(arg, c) < 0.0) {
      out.u.col(c) *= -1.0;
      out.v.col(c) *= -1.0;
    }
  }
  return out;
}

EmbeddingTable svd_embed(const SparseCounts& counts, const SvdOptions& options) {
  TruncatedSvd svd = randomized_svd(counts, options);
  EmbeddingTable table;
  table.source = EmbeddingSource::svd;
  table.dim = static_cast<std::size_t>(svd.sigma.size());
  table.vectors = svd.u * svd.sigma.asDiagonal();
  table.singular_values = svd.sigma;
  table.rank_clamped = svd.rank_clamped;
  table.vocab_size = counts.rows;
  table.covered = counts.rows;
  return table;
}

EmbeddingTable parse_embeddings(std::istream& in, const Vocabulary& vocab) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("vector file: missing header", 1);
  std::size_t count = 0, dim = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> count >> dim) || (hs >> extra) || dim == 0)
      throw ParseError("vector file: header must be 'V d' at line " + std::to_string(line_no),
                       line_no);
  }
  EmbeddingTable table;
  table.source = EmbeddingSource::external;
  table.dim = dim;
  table.vocab_size = vocab.size();
  table.vectors = Matrix::Zero(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
  std::vector<bool> seen(vocab.size(), false);
  std::vector<double> values;
  for (std::size_t row = 0; row < count; ++row) {
    if (!next_line())
      throw ParseError("vector file: expected " + std::to_string(count) + " vectors, found " +
                           std::to_string(row),
                       line_no + 1);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    const char* tok_begin = p;
    while (p < end && *p != ' ' && *p != '\t') ++p;
    const std::string token(tok_begin, p);
    values.clear();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc() || (res.ptr != end && *res.ptr != ' ' && *res.ptr != '\t'))
        throw ParseError("vector file: malformed number at line " + std::to_string(line_no), line_no);
      if (!std::isfinite(v))
        throw ParseError("vector file: non-finite value at line " + std::to_string(line_no), line_no);
      values.push_back(v);
      p = res.ptr;
    }
    if (values.size() != dim)
      throw ParseError("vector file: line " + std::to_string(line_no) + " has " +
                           std::to_string(values.size()) + " values, header says " +
                           std::to_string(dim),
                       line_no);
    const TokenId id = vocab.find(token);
    if (id == vocab.size() || seen[id]) continue;
    seen[id] = true;
    ++table.covered;
    for (std::size_t j = 0; j < dim; ++j) table.vectors(id, static_cast<Eigen::Index>(j)) = values[j];
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_embeddings(in, vocab);
}

void save_embeddings(const EmbeddingTable& table, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  if (static_cast<std::size_t>(table.vectors.rows()) != vocab.size())
    throw ValidationError("save_embeddings: table rows do not match vocabulary");
  std::string out = std::to_string(vocab.size()) + " " + std::to_string(table.dim) + "\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += vocab.term(static_cast<TokenId>(i));
    for (std::size_t j = 0; j < table.dim; ++j) {
      out += ' ';
      out += io::format_double(table.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += '\n';
  }
  io::write_file(path, out);
}

SemanticPath build_path(const TokenDoc& doc, const EmbeddingTable& table, std::size_t n,
                        std::size_t stride) {
  const NGramStream grams = extract_ngrams(doc, n, stride);
  const auto d = static_cast<Eigen::Index>(table.dim);
  SemanticPath path;
  path.doc_id = doc.id;
  path.label = doc.label;
  path.n = n;
  path.word_dim = table.dim;
  path.points.resize(static_cast<Eigen::Index>(grams.size()), static_cast<Eigen::Index>(n) * d);
  path.word_mu.resize(static_cast<Eigen::Index>(grams.size()), static_cast<Eigen::Index>(n));
  path.grams = grams.flat;

  std::map<TokenId, std::size_t> counts;
  std::size_t max_count = 0;
  for (TokenId t : doc.tokens) max_count = std::max(max_count, ++counts[t]);

  for (std::size_t g = 0; g < grams.size(); ++g) {
    const auto row = static_cast<Eigen::Index>(g);
    const auto gram = grams.gram(g);
    for (std::size_t w = 0; w < n; ++w) {
      const TokenId t = gram[w];
      if (t >= static_cast<TokenId>(table.vectors.rows()))
        throw ValidationError("build_path: token outside embedding table in " + doc.id);
      path.points.row(row).segment(static_cast<Eigen::Index>(w) * d, d) = table.vectors.row(t);
      path.word_mu(row, static_cast<Eigen::Index>(w)) =
          static_cast<double>(counts[t]) / static_cast<double>(max_count);
    }
  }
  return path;
}

void save_paths(const std::vector<SemanticPath>& paths, const std::filesystem::path& dir) {
  using nlohmann::json;
  std::filesystem::create_directories(dir);
  std::vector<double> points, mu;
  json meta;
  meta["format"] = "spotbot-paths";
  meta["version"] = 1;
  meta["dtype"] = "float64-le";
  const std::size_t n = paths.empty() ? 0 : paths.front().n;
  const std::size_t d = paths.empty() ? 0 : paths.front().word_dim;
  meta["n"] = n;
  meta["word_dim"] = d;
  meta["cols"] = n * d;
  json entries = json::array();
  std::size_t offset = 0;
  for (const auto& p : paths) {
    if (p.n != n || p.word_dim != d) throw ValidationError("save_paths: paths differ in shape");
    entries.push_back({{"doc_id", p.doc_id},
                       {"label", std::string(to_string(p.label))},
                       {"rows", p.length()},
                       {"offset", offset},
                       {"grams", p.grams}});
    offset += p.length();
    points.insert(points.end(), p.points.data(), p.points.data() + p.points.size());
    mu.insert(mu.end(), p.word_mu.data(), p.word_mu.data() + p.word_mu.size());
  }
  meta["total_rows"] = offset;
  meta["points_file"] = "paths.bin";
  meta["mu_file"] = "mu.bin";
  meta["paths"] = std::move(entries);
  io::write_f64(dir / "paths.bin", points);
  io::write_f64(dir / "mu.bin", mu);
  io::write_file(dir / "paths.json", meta.dump(1));
}

std::vector<SemanticPath> load_paths(const std::filesystem::path& dir) {
  using nlohmann::json;
  json meta;
  try {
    meta = json::parse(io::read_file(dir / "paths.json"));
  } catch (const json::parse_error& e) {
    throw ValidationError((dir / "paths.json").string() + ": " + e.what());
  }
  if (meta.value("format", "") != "spotbot-paths")
    throw ValidationError(dir.string() + ": not a spotbot paths directory");
  const std::size_t n = meta.at("n");
  const std::size_t d = meta.at("word_dim");
  const std::size_t cols = n * d;
  const std::vector<double> points = io::read_f64(dir / "paths.bin");
  const std::vector<double> mu = io::read_f64(dir / "mu.bin");
  const std::size_t total = meta.at("total_rows");
  if (points.size() != total * cols || mu.size() != total * n)
    throw ValidationError(dir.string() + ": binary size does not match paths.json");
  std::vector<SemanticPath> out;
  for (const auto& e : meta.at("paths")) {
    SemanticPath p;
    p.doc_id = e.at("doc_id");
    p.label = parse_label(e.at("label").get<std::string>());
    p.n = n;
    p.word_dim = d;
    const std::size_t rows = e.at("rows");
    const std::size_t offset = e.at("offset");
    p.points = Eigen::Map<const Matrix>(points.data() + offset * cols,
                                        static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    p.word_mu = Eigen::Map<const Matrix>(mu.data() + offset * n, static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(n));
    p.grams = e.at("grams").get<std::vector<TokenId>>();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace spotbot
