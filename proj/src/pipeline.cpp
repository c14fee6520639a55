#include "spotbot/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spotbot/fuzzy.hpp"
#include "spotbot/kernels.hpp"

namespace spotbot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ValidationError("config: '" + std::string(key) + "' expects a non-negative integer, got '" +
                          std::string(v) + "'");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isnan(out))
    throw ValidationError("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config: '" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

fs::path resolve(const fs::path& base, std::string_view v) {
  fs::path p{std::string(v)};
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

void apply_config_value(PipelineConfig& c, std::string_view key, std::string_view value,
                        const fs::path& base_dir) {
  const std::string v = trim(value);
  if (key == "manifest") c.manifests.push_back(resolve(base_dir, v));
  else if (key == "input") c.input_dirs.push_back(resolve(base_dir, v));
  else if (key == "tokenizer.lowercase") c.tokenizer.lowercase = to_bool(key, v);
  else if (key == "tokenizer.strip_punctuation") c.tokenizer.strip_punctuation = to_bool(key, v);
  else if (key == "tokenizer.pretokenized") c.tokenizer.pretokenized = to_bool(key, v);
  else if (key == "min_count") c.min_count = to_size(key, v);
  else if (key == "bots.generate") c.generate_bots = to_bool(key, v);
  else if (key == "bots.order") c.markov_order = to_size(key, v);
  else if (key == "bots.unit") c.markov_unit = parse_markov_unit(v);
  else if (key == "embedding.method") c.embedding_method = v;
  else if (key == "embedding.dim") c.embedding_dim = to_size(key, v);
  else if (key == "embedding.weighting") c.weighting = parse_weighting(v);
  else if (key == "embedding.vectors") c.vectors_file = resolve(base_dir, v);
  else if (key == "ngram.n") c.ngram_n = to_size(key, v);
  else if (key == "ngram.stride") c.ngram_stride = to_size(key, v);
  else if (key == "features.ec") c.ec_features = to_bool(key, v);
  else if (key == "features.cluster") c.cluster_features = to_bool(key, v);
  else if (key == "ec.m") c.ec.m_grid = io::parse_size_list(v);
  else if (key == "ec.n") c.ec.n_grid = io::parse_size_list(v);
  else if (key == "ec.stride") c.ec.stride = to_size(key, v);
  else if (key == "ec.budget") c.ec.pattern_budget = to_double(key, v);
  else if (key == "ec.margin") c.ec.margin_fraction = to_double(key, v);
  else if (key == "cluster.algo") c.cluster.algo = parse_algorithm(v);
  else if (key == "cluster.k") c.cluster.k = to_size(key, v);
  else if (key == "cluster.k_neighbors") c.cluster.k_neighbors = to_size(key, v);
  else if (key == "cluster.h") c.cluster.h = to_double(key, v);
  else if (key == "cluster.fuzzifier") c.cluster.fuzzifier = to_double(key, v);
  else if (key == "cluster.delta_c") c.cluster.delta_c = to_double(key, v);
  else if (key == "cluster.l") c.cluster.l = to_double(key, v);
  else if (key == "cluster.r") c.cluster.r = to_double(key, v);
  else if (key == "cluster.alpha_levels") c.cluster.alpha_levels = to_size(key, v);
  else if (key == "cluster.linkage") c.cluster.linkage = parse_linkage(v);
  else if (key == "cluster.sample") c.cluster.sample = to_size(key, v);
  else if (key == "classify.lambda") c.lambda_grid = io::parse_double_list(v);
  else if (key == "classify.folds") c.folds = to_size(key, v);
  else if (key == "classify.epochs") c.epochs = to_size(key, v);
  else if (key == "classify.test_fraction") c.test_fraction = to_double(key, v);
  else if (key == "seed") c.seed = to_size(key, v);
  else if (key == "jobs") c.jobs = to_size(key, v);
  else if (key == "out") c.out_dir = resolve(base_dir, v);
  else if (key == "cache") c.use_cache = to_bool(key, v);
  else throw ValidationError("config: unknown key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  PipelineConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(number) + ": expected 'key = value'");
    apply_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1), base_dir);
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  return parse_config(io::read_file(path), path.parent_path());
}

void validate_config(const PipelineConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (c.manifests.empty() && c.input_dirs.empty()) fail("no manifest or input directory given");
  for (const auto& m : c.manifests)
    if (!fs::is_regular_file(m)) fail("manifest not found: " + m.string());
  for (const auto& d : c.input_dirs)
    if (!fs::is_directory(d)) fail("input directory not found: " + d.string());
  if (c.min_count < 1) fail("min_count must be >= 1");
  if (c.markov_order < 1) fail("bots.order must be >= 1");
  if (c.embedding_method != "svd" && c.embedding_method != "file")
    fail("embedding.method must be svd or file, got '" + c.embedding_method + "'");
  if (c.embedding_method == "file" && !fs::is_regular_file(c.vectors_file))
    fail("embedding.vectors not found: " + c.vectors_file.string());
  if (c.embedding_dim < 1) fail("embedding.dim must be >= 1");
  if (c.ngram_n < 1 || c.ngram_stride < 1) fail("ngram.n and ngram.stride must be >= 1");
  if (!c.ec_features && !c.cluster_features) fail("enable at least one of features.ec, features.cluster");
  if (c.ec.m_grid.empty() || c.ec.n_grid.empty()) fail("ec.m and ec.n must be non-empty");
  for (auto m : c.ec.m_grid)
    if (m < 1) fail("ec.m entries must be >= 1");
  for (auto n : c.ec.n_grid)
    if (n < 2 || n > 20) fail("ec.n entries must lie in [2, 20]");
  if (c.ec.stride < 1) fail("ec.stride must be >= 1");
  if (!(c.ec.pattern_budget >= 2.0)) fail("ec.budget must be >= 2");
  if (!(c.ec.margin_fraction >= 0.0)) fail("ec.margin must be >= 0");
  if (c.cluster.k < 1) fail("cluster.k must be >= 1");
  if (c.cluster.k_neighbors < 1) fail("cluster.k_neighbors must be >= 1");
  if (!(c.cluster.h >= 0.0)) fail("cluster.h must be >= 0");
  if (!(c.cluster.fuzzifier > 1.0)) fail("cluster.fuzzifier must be > 1");
  for (const auto& w : {c.cluster.delta_c, c.cluster.l, c.cluster.r})
    if (w && !(*w >= 0.0)) fail("fuzzification widths must be >= 0");
  if (c.cluster.alpha_levels < 2) fail("cluster.alpha_levels must be >= 2");
  if (c.lambda_grid.empty()) fail("classify.lambda must be non-empty");
  for (double l : c.lambda_grid)
    if (!(l > 0.0)) fail("classify.lambda entries must be > 0");
  if (c.folds < 2) fail("classify.folds must be >= 2");
  if (c.epochs < 1) fail("classify.epochs must be >= 1");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) fail("classify.test_fraction must lie in (0, 1)");
}

int class_of(Label label) {
  switch (label) {
    case Label::human: return 1;
    case Label::bot_simple:
    case Label::bot_advanced: return -1;
    case Label::unlabeled: break;
  }
  throw ValidationError("class_of: text is unlabeled");
}

Clustering cluster_path(const SemanticPath& path, const ClusterConfig& config, std::uint64_t seed) {
  SemanticPath sub;
  const SemanticPath* use = &path;
  const std::size_t len = path.length();
  if (config.sample > 0 && len > config.sample) {
    sub = path;
    sub.points.resize(static_cast<Eigen::Index>(config.sample), path.points.cols());
    sub.word_mu.resize(static_cast<Eigen::Index>(config.sample), path.word_mu.cols());
    for (std::size_t i = 0; i < config.sample; ++i) {
      const auto src = static_cast<Eigen::Index>(i * len / config.sample);
      sub.points.row(static_cast<Eigen::Index>(i)) = path.points.row(src);
      if (path.word_mu.rows() == path.points.rows())
        sub.word_mu.row(static_cast<Eigen::Index>(i)) = path.word_mu.row(src);
    }
    use = &sub;
  }
  const Matrix& points = use->points;
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw ValidationError("cluster: empty path '" + path.doc_id + "'");
  switch (config.algo) {
    case Algorithm::kmeans:
      return kmeans(points, {std::min(config.k, n), seed, 1e-6, 300});
    case Algorithm::cmeans:
      return cmeans(points, {std::min(config.k, n), config.fuzzifier, seed, 1e-6, 300});
    case Algorithm::wishart: {
      const Matrix dist = kernels::parallel::euclidean_distances(points);
      return wishart(dist, {config.k_neighbors, config.h, static_cast<double>(points.cols())});
    }
    case Algorithm::wishart_fuzzy: {
      FuzzParams params = FuzzParams::from_spread(pooled_word_vectors(*use));
      for (std::size_t j = 0; j < params.dim(); ++j) {
        if (config.delta_c) params.delta_c[j] = *config.delta_c;
        if (config.l) params.l[j] = *config.l;
        if (config.r) params.r[j] = *config.r;
      }
      const auto data = fuzzify_path(*use, params);
      return wishart_fuzzy(data, config.k_neighbors, config.h, config.alpha_levels);
    }
  }
  throw ValidationError("cluster: unknown algorithm");
}

namespace {

std::string params_string(const ClusterConfig& c) {
  std::ostringstream out;
  switch (c.algo) {
    case Algorithm::kmeans: out << "k=" << c.k; break;
    case Algorithm::cmeans: out << "k=" << c.k << ";m=" << io::format_double(c.fuzzifier); break;
    case Algorithm::wishart:
    case Algorithm::wishart_fuzzy: out << "k_neighbors=" << c.k_neighbors << ";h=" << io::format_double(c.h); break;
  }
  return out.str();
}

std::string num(double v) { return std::isnan(v) ? "nan" : io::format_double(v); }

}  // namespace

std::string stats_csv(const std::vector<StatsRow>& rows) {
  io::CsvTable t;
  t.header = {"doc_id", "label", "algo", "params", "rmsstd", "rs", "noise_ratio", "inter_avg", "inter_min", "inter_max"};
  for (const auto& r : rows) {
    const auto& s = r.stats;
    t.rows.push_back({r.doc_id, std::string(to_string(r.label)), r.algo, r.params,
                      s.rmsstd_defined ? num(s.rmsstd) : "nan", s.rs_defined ? num(s.rs) : "nan",
                      num(s.noise_ratio), num(s.inter.avg), num(s.inter.min), num(s.inter.max)});
  }
  return io::to_csv(t);
}

std::string ec_csv(std::span<const TextEC> points) {
  io::CsvTable t;
  t.header = {"doc_id", "m", "n", "H", "C", "dist_to_upper", "chaotic"};
  for (const auto& p : points) {
    if (!p.point) continue;
    t.rows.push_back({p.doc_id, std::to_string(p.m), std::to_string(p.n), num(p.point->h), num(p.point->c),
                      num(p.chaotic.distance_to_upper), p.chaotic.chaotic ? "true" : "false"});
  }
  return io::to_csv(t);
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  io::CsvTable t;
  t.header = {"m", "n", "mean_H", "mean_C", "chaotic_fraction", "texts", "skipped", "reason"};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.m), std::to_string(r.n), num(r.mean_h), num(r.mean_c),
                      num(r.chaotic_fraction), std::to_string(r.texts), r.skipped ? "true" : "false", r.reason});
  return io::to_csv(t);
}

std::string boundaries_csv(const BoundaryCurves& curves, std::size_t samples) {
  if (samples < 2) throw ValidationError("boundaries: need at least 2 samples");
  io::CsvTable t;
  t.header = {"h", "c_lower", "c_upper"};
  for (std::size_t i = 0; i <= samples; ++i) {
    const double h = static_cast<double>(i) / static_cast<double>(samples);
    t.rows.push_back({num(h), num(curves.lower_at(h)), num(curves.upper_at(h))});
  }
  return io::to_csv(t);
}

std::string emit_plot_data(std::string_view kind, const fs::path& input) {
  if (!fs::exists(input)) throw ValidationError("plot-data: input not found: " + input.string());
  const io::CsvTable in = io::read_csv(input);
  io::CsvTable out;
  if (kind == "ec-scatter") {
    out.header = {"doc_id", "m", "n", "H", "C"};
    const auto id = in.column("doc_id"), m = in.column("m"), n = in.column("n"), h = in.column("H"),
               c = in.column("C");
    for (const auto& r : in.rows) out.rows.push_back({r[id], r[m], r[n], r[h], r[c]});
  } else if (kind == "sweep-heatmap") {
    out.header = {"m", "n", "mean_C"};
    const auto m = in.column("m"), n = in.column("n"), c = in.column("mean_C"), s = in.column("skipped");
    for (const auto& r : in.rows)
      if (r[s] != "true") out.rows.push_back({r[m], r[n], r[c]});
  } else if (kind == "noise-ratio") {
    const std::string group = std::find(in.header.begin(), in.header.end(), "corpus") != in.header.end()
                                  ? "corpus"
                                  : "label";
    const auto g = in.column(group), v = in.column("noise_ratio");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& r : in.rows) {
      auto& [sum, count] = acc[r[g]];
      sum += to_double("noise_ratio", r[v]);
      ++count;
    }
    out.header = {"corpus", "noise_ratio"};
    for (const auto& [name, sc] : acc) out.rows.push_back({name, num(sc.first / static_cast<double>(sc.second))});
  } else if (kind == "boundaries") {
    const auto m = in.column("m"), n = in.column("n");
    std::set<std::pair<std::size_t, std::size_t>> cells;
    for (const auto& r : in.rows) cells.insert({to_size("m", r[m]), to_size("n", r[n])});
    out.header = {"m", "n", "h", "c_lower", "c_upper"};
    for (const auto& [cm, cn] : cells) {
      const io::CsvTable curve = io::read_csv_string(boundaries_csv(boundary_curves(alphabet_size(cn, cm), 2), 200));
      for (const auto& r : curve.rows)
        out.rows.push_back({std::to_string(cm), std::to_string(cn), r[0], r[1], r[2]});
    }
  } else {
    throw ValidationError("plot-data: unknown kind '" + std::string(kind) +
                          "' (want ec-scatter|boundaries|noise-ratio|sweep-heatmap)");
  }
  return io::to_csv(out);
}

std::vector<FeatureRow> ec_feature_rows(const io::CsvTable& ec, std::size_t m, std::size_t n,
                                        const std::map<std::string, Label>& labels) {
  const auto id = ec.column("doc_id"), cm = ec.column("m"), cn = ec.column("n"), h = ec.column("H"),
             c = ec.column("C");
  std::vector<FeatureRow> rows;
  for (const auto& r : ec.rows) {
    if (to_size("m", r[cm]) != m || to_size("n", r[cn]) != n) continue;
    const auto it = labels.find(r[id]);
    if (it == labels.end()) throw ValidationError("features: no label for '" + r[id] + "'");
    rows.push_back({r[id], {to_double("H", r[h]), to_double("C", r[c])}, class_of(it->second)});
  }
  return rows;
}

std::vector<FeatureRow> cluster_feature_rows(const io::CsvTable& stats,
                                             const std::map<std::string, Label>& labels) {
  const auto id = stats.column("doc_id"), a = stats.column("inter_avg"), lo = stats.column("inter_min"),
             hi = stats.column("inter_max");
  std::vector<FeatureRow> rows;
  for (const auto& r : stats.rows) {
    const auto it = labels.find(r[id]);
    if (it == labels.end()) throw ValidationError("features: no label for '" + r[id] + "'");
    rows.push_back({r[id],
                    {to_double("inter_avg", r[a]), to_double("inter_min", r[lo]), to_double("inter_max", r[hi])},
                    class_of(it->second)});
  }
  return rows;
}

std::string features_csv(std::span<const FeatureRow> rows, std::span<const std::string> names) {
  io::CsvTable t;
  t.header = {"doc_id", "label"};
  t.header.insert(t.header.end(), names.begin(), names.end());
  for (const auto& r : rows) {
    if (r.features.size() != names.size()) throw ValidationError("features: row width does not match names");
    std::vector<std::string> cells{r.doc_id, std::to_string(r.label)};
    for (double v : r.features) cells.push_back(num(v));
    t.rows.push_back(std::move(cells));
  }
  return io::to_csv(t);
}

std::vector<FeatureRow> read_features_csv(const fs::path& path, std::vector<std::string>* names) {
  const io::CsvTable t = io::read_csv(path);
  const auto id = t.column("doc_id"), label = t.column("label");
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (j != id && j != label) cols.push_back(j);
  if (cols.empty()) throw ValidationError("features: " + path.string() + " has no feature columns");
  if (names) {
    names->clear();
    for (auto j : cols) names->push_back(t.header[j]);
  }
  std::vector<FeatureRow> rows;
  for (const auto& r : t.rows) {
    FeatureRow row;
    row.doc_id = r[id];
    const std::string& l = r[label];
    if (l == "1" || l == "+1") row.label = 1;
    else if (l == "-1") row.label = -1;
    else row.label = class_of(parse_label(l));
    for (auto j : cols) row.features.push_back(to_double(t.header[j], r[j]));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

class Stage {
 public:
  Stage(RunReport& report, std::string name) : report_(report), name_(std::move(name)),
        start_(std::chrono::steady_clock::now()) {}
  void cached() { cached_ = true; }
  void done() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    report_.timings.push_back({name_, d.count(), cached_});
  }
  const std::string& name() const { return name_; }

 private:
  RunReport& report_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
  bool cached_ = false;
};

template <typename F>
auto run_stage(RunReport& report, const std::string& name, F&& body) {
  Stage stage(report, name);
  try {
    if constexpr (std::is_void_v<decltype(body(stage))>) {
      body(stage);
      stage.done();
    } else {
      auto out = body(stage);
      stage.done();
      return out;
    }
  } catch (const ValidationError& e) {
    throw ValidationError("stage '" + name + "': " + e.what());
  } catch (const ParseError& e) {
    throw ValidationError("stage '" + name + "': line " + std::to_string(e.line()) + ": " + e.what());
  } catch (const IngestError& e) {
    throw ValidationError("stage '" + name + "': byte " + std::to_string(e.byte_offset()) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("stage '" + name + "': " + e.what());
  }
}

std::string tokenizer_key(const TokenizerConfig& t) {
  return std::to_string(t.lowercase) + std::to_string(t.strip_punctuation) + std::to_string(t.pretokenized);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& config) {
  validate_config(config);
  if (config.jobs > 0) omp_set_num_threads(static_cast<int>(config.jobs));
  RunReport report;
  const fs::path out = config.out_dir;
  const fs::path cache = out / "cache";
  fs::create_directories(cache);
  auto write_output = [&](const std::string& rel, const std::string& content) {
    io::write_file(out / rel, content);
    report.file_hashes[rel] = io::content_hash(content);
  };

  // Ingest, with the bot stand-in generated from the human texts.
  std::string corpus_key;
  Corpus corpus = run_stage(report, "ingest", [&](Stage& stage) {
    std::vector<RawDocument> raw;
    for (const auto& m : config.manifests) {
      auto docs = read_manifest(m);
      raw.insert(raw.end(), std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.end()));
    }
    for (const auto& d : config.input_dirs) {
      auto docs = read_text_directory(d);
      for (auto& doc : docs)
        if (doc.label == Label::unlabeled) doc.label = Label::human;
      raw.insert(raw.end(), std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.end()));
    }
    std::sort(raw.begin(), raw.end(), [](const RawDocument& a, const RawDocument& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < raw.size(); ++i)
      if (raw[i].id == raw[i - 1].id) throw ValidationError("duplicate document id '" + raw[i].id + "'");

    std::string key = "ingest;" + tokenizer_key(config.tokenizer) + ";" + std::to_string(config.min_count);
    if (config.generate_bots)
      key += ";bots;" + std::to_string(config.markov_order) + ";" +
             std::to_string(static_cast<int>(config.markov_unit)) + ";" + std::to_string(config.seed);
    for (const auto& d : raw) key += ";" + d.id + ":" + std::string(to_string(d.label)) + ":" + io::content_hash(d.text);
    corpus_key = io::content_hash(key);
    const fs::path cached = cache / ("corpus-" + corpus_key + ".json");
    if (config.use_cache && fs::exists(cached)) {
      stage.cached();
      return load_corpus(cached);
    }

    if (config.generate_bots) {
      std::vector<std::string> humans;
      std::vector<std::size_t> lengths;
      std::vector<std::string> ids;
      MarkovGenerator gen(config.markov_order, config.markov_unit);
      for (const auto& d : raw) {
        if (d.label != Label::human) continue;
        const auto toks = tokenize(d.text, config.tokenizer);
        std::string joined;
        for (const auto& t : toks) {
          if (!joined.empty()) joined += ' ';
          joined += t;
        }
        gen.train(joined);
        lengths.push_back(toks.size());
        ids.push_back(d.id);
      }
      if (ids.empty()) throw ValidationError("no human texts to train the bot stand-in on");
      for (std::size_t i = 0; i < ids.size(); ++i) {
        RawDocument bot{"bot_" + ids[i], gen.generate(lengths[i], config.seed + i), Label::bot_simple};
        io::write_file(out / "bots" / (bot.id + ".txt"), bot.text + "\n");
        raw.push_back(std::move(bot));
      }
      std::sort(raw.begin(), raw.end(), [](const RawDocument& a, const RawDocument& b) { return a.id < b.id; });
    }
    Corpus built = build_corpus(raw, config.tokenizer, config.min_count);
    save_corpus(built, cached);
    return built;
  });
  save_corpus(corpus, out / "corpus.json");
  std::map<std::string, Label> labels;
  for (const auto& d : corpus.docs) {
    labels[d.id] = d.label;
    (d.label == Label::human ? report.human_texts : report.bot_texts) += 1;
  }
  if (report.human_texts == 0 || report.bot_texts == 0)
    throw ValidationError("run needs both human and bot texts");

  std::string embed_key;
  EmbeddingTable table = run_stage(report, "embed", [&](Stage& stage) {
    std::string key = corpus_key + ";" + config.embedding_method + ";" + std::to_string(config.embedding_dim) + ";" +
                      std::to_string(static_cast<int>(config.weighting)) + ";" + std::to_string(config.seed);
    if (config.embedding_method == "file") key += ";" + io::file_hash(config.vectors_file);
    embed_key = io::content_hash(key);
    const fs::path cached = cache / ("emb-" + embed_key + ".vec");
    if (config.use_cache && fs::exists(cached)) {
      stage.cached();
      return load_embeddings(cached, corpus.vocab);
    }
    EmbeddingTable t;
    if (config.embedding_method == "file") {
      t = load_embeddings(config.vectors_file, corpus.vocab);
    } else {
      SvdOptions opt;
      opt.rank = config.embedding_dim;
      opt.weighting = config.weighting;
      opt.seed = config.seed;
      t = svd_embed(corpus.counts, opt);
    }
    save_embeddings(t, corpus.vocab, cached);
    return t;
  });
  save_embeddings(table, corpus.vocab, out / "emb.vec");

  std::vector<SemanticPath> paths = run_stage(report, "path", [&](Stage&) {
    std::vector<SemanticPath> p(corpus.docs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(p.size()); ++i)
      p[static_cast<std::size_t>(i)] = build_path(corpus.docs[static_cast<std::size_t>(i)], table, config.ngram_n,
                                                  config.ngram_stride);
    return p;
  });
  save_paths(paths, out / "paths");

  CvOptions cv;
  cv.folds = config.folds;
  cv.lambda_grid = config.lambda_grid;
  cv.seed = config.seed;
  cv.train.epochs = config.epochs;
  cv.train.seed = config.seed;

  if (config.ec_features) {
    const auto points = run_stage(report, "ecplane", [&](Stage&) { return ec_points(paths, config.ec); });
    write_output("ec.csv", ec_csv(points));
    write_output("sweep.csv", sweep_csv(summarize_sweep(points, config.ec)));

    run_stage(report, "ec-classify", [&](Stage&) {
      const io::CsvTable ec = io::read_csv_string(ec_csv(points));
      const std::vector<std::string> names{"H", "C"};
      for (std::size_t m : config.ec.m_grid)
        for (std::size_t n : config.ec.n_grid) {
          EcCellResult cell;
          cell.m = m;
          cell.n = n;
          const auto rows = ec_feature_rows(ec, m, n, labels);
          if (log_alphabet_size(n, m) > std::log(config.ec.pattern_budget)) {
            cell.skipped = true;
            cell.reason = "pattern budget exceeded";
          } else if (rows.size() < corpus.docs.size()) {
            cell.skipped = true;
            cell.reason = "some texts too short";
          } else {
            const CvReport full = cross_validate(rows, cv);
            const SplitReport split = train_test_evaluate(rows, config.test_fraction, cv);
            cell.cv_mean = full.best_mean;
            cell.cv_sd = full.best_sd;
            cell.best_lambda = full.best_lambda;
            cell.train_accuracy = split.train_accuracy;
            cell.test_accuracy = split.test_accuracy;
            write_output("features/ec_m" + std::to_string(m) + "_n" + std::to_string(n) + ".csv",
                         features_csv(rows, names));
            if (!report.best_ec_cell || cell.cv_mean > report.best_ec_cell->cv_mean) report.best_ec_cell = cell;
          }
          report.ec_cells.push_back(cell);
        }
      io::CsvTable t;
      t.header = {"m", "n", "cv_mean", "cv_sd", "best_lambda", "train_accuracy", "test_accuracy", "skipped"};
      for (const auto& c : report.ec_cells)
        t.rows.push_back({std::to_string(c.m), std::to_string(c.n), num(c.cv_mean), num(c.cv_sd),
                          num(c.best_lambda), num(c.train_accuracy), num(c.test_accuracy),
                          c.skipped ? "true" : "false"});
      write_output("ec_accuracy.csv", io::to_csv(t));
    });
  }

  if (config.cluster_features) {
    std::vector<StatsRow> stats = run_stage(report, "cluster", [&](Stage&) {
      std::vector<StatsRow> rows(paths.size());
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(paths.size()); ++i) {
        const auto& path = paths[static_cast<std::size_t>(i)];
        const Clustering cl = cluster_path(path, config.cluster, config.seed + static_cast<std::uint64_t>(i));
        auto& row = rows[static_cast<std::size_t>(i)];
        row.doc_id = path.doc_id;
        row.label = path.label;
        row.algo = std::string(to_string(config.cluster.algo));
        row.params = params_string(config.cluster);
        Matrix pts = path.points;
        if (config.cluster.sample > 0 && path.length() > config.cluster.sample) {
          pts.resize(static_cast<Eigen::Index>(config.cluster.sample), path.points.cols());
          for (std::size_t r = 0; r < config.cluster.sample; ++r)
            pts.row(static_cast<Eigen::Index>(r)) =
                path.points.row(static_cast<Eigen::Index>(r * path.length() / config.cluster.sample));
        }
        row.stats = cluster_stats(pts, cl.labels, config.cluster.linkage);
      }
      return rows;
    });
    write_output("stats.csv", stats_csv(stats));

    run_stage(report, "stats", [&](Stage&) {
      std::vector<double> human, bot;
      for (const auto& r : stats) {
        if (!r.stats.rmsstd_defined || std::isnan(r.stats.rmsstd)) continue;
        (r.label == Label::human ? human : bot).push_back(r.stats.rmsstd);
      }
      if (human.empty() || bot.empty()) return;
      const auto mode = human.size() + bot.size() <= kExactTestLimit ? PValueMode::exact : PValueMode::normal;
      report.rmsstd_test = wilcoxon_ranksum(human, bot, mode);
      report.human_rmsstd_median = median(human);
      report.bot_rmsstd_median = median(bot);
    });

    run_stage(report, "cluster-classify", [&](Stage&) {
      const auto rows = cluster_feature_rows(io::read_csv_string(stats_csv(stats)), labels);
      const std::vector<std::string> names{"inter_avg", "inter_min", "inter_max"};
      write_output("features/cluster.csv", features_csv(rows, names));
      report.cluster_classification = train_test_evaluate(rows, config.test_fraction, cv);
    });
  }

  io::write_file(out / "report.json", run_report_json(report));
  return report;
}

std::string run_report_json(const RunReport& r) {
  auto cell_json = [](const EcCellResult& c) {
    json j{{"m", c.m}, {"n", c.n}, {"skipped", c.skipped}};
    if (c.skipped) {
      j["reason"] = c.reason;
    } else {
      j["cv_mean"] = c.cv_mean;
      j["cv_sd"] = c.cv_sd;
      j["best_lambda"] = c.best_lambda;
      j["train_accuracy"] = c.train_accuracy;
      j["test_accuracy"] = c.test_accuracy;
    }
    return j;
  };
  json j;
  j["human_texts"] = r.human_texts;
  j["bot_texts"] = r.bot_texts;
  j["timings"] = json::array();
  for (const auto& t : r.timings) j["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}, {"cached", t.cached}});
  j["file_hashes"] = r.file_hashes;
  j["ec_cells"] = json::array();
  for (const auto& c : r.ec_cells) j["ec_cells"].push_back(cell_json(c));
  if (r.best_ec_cell) j["best_ec_cell"] = cell_json(*r.best_ec_cell);
  if (r.rmsstd_test) {
    j["rmsstd_ranksum"] = {{"U", r.rmsstd_test->statistic},
                           {"p_value", r.rmsstd_test->p_value},
                           {"human_median", r.human_rmsstd_median},
                           {"bot_median", r.bot_rmsstd_median},
                           {"more_compact", r.bot_rmsstd_median < r.human_rmsstd_median ? "bot" : "human"}};
  }
  if (r.cluster_classification) {
    const auto& s = *r.cluster_classification;
    j["cluster_classification"] = {{"train_accuracy", s.train_accuracy},
                                   {"test_accuracy", s.test_accuracy},
                                   {"cv_mean", s.cv.best_mean},
                                   {"cv_sd", s.cv.best_sd},
                                   {"best_lambda", s.cv.best_lambda}};
  }
  return j.dump(2) + "\n";
}

}  // namespace spotbot
