#include <omp.h>

#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spotbot/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spotbot;

namespace {

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-")
    std::cout << content;
  else
    io::write_file(out, content);
}

std::vector<RawDocument> read_inputs(const std::vector<std::string>& dirs, const std::vector<std::string>& manifests) {
  std::vector<RawDocument> raw;
  for (const auto& m : manifests) {
    auto d = read_manifest(m);
    raw.insert(raw.end(), d.begin(), d.end());
  }
  for (const auto& dir : dirs) {
    auto d = read_text_directory(dir);
    raw.insert(raw.end(), d.begin(), d.end());
  }
  if (raw.empty()) throw ValidationError("no input texts (use --input or --manifest)");
  std::sort(raw.begin(), raw.end(), [](const RawDocument& a, const RawDocument& b) { return a.id < b.id; });
  return raw;
}

std::map<std::string, Label> corpus_labels(const std::string& corpus_path) {
  std::map<std::string, Label> labels;
  for (const auto& d : load_corpus(corpus_path).docs) labels[d.id] = d.label;
  return labels;
}

PValueMode pick_mode(const std::string& mode, std::size_t na, std::size_t nb) {
  if (mode == "auto") return na + nb <= kExactTestLimit ? PValueMode::exact : PValueMode::normal;
  return parse_pvalue_mode(mode);
}

std::vector<double> finite_column(const std::string& path, const std::string& column) {
  std::vector<double> out;
  for (double v : io::read_csv(path).numeric_column(column))
    if (!std::isnan(v)) out.push_back(v);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spotbot: tell human-written texts from generated ones"};
  app.require_subcommand(1);
  std::size_t jobs = 0;
  app.add_option("--jobs", jobs, "worker threads (0 = default)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "tokenize texts into a corpus cache");
  std::vector<std::string> in_dirs, in_manifests;
  std::size_t min_count = 1;
  bool keep_case = false, keep_punct = false, pretok = false;
  std::string out;
  ingest->add_option("--input", in_dirs, "directory of .txt files");
  ingest->add_option("--manifest", in_manifests, "manifest JSON");
  ingest->add_option("--min-count", min_count);
  ingest->add_flag("--keep-case", keep_case);
  ingest->add_flag("--keep-punct", keep_punct);
  ingest->add_flag("--pretokenized", pretok);
  ingest->add_option("--out", out)->required();

  // embed
  auto* embed = app.add_subcommand("embed", "word vectors by truncated SVD, or load external ones");
  std::string corpus_path, vectors_path, weighting = "log1p";
  std::size_t dim = 8;
  std::uint64_t seed = 7;
  embed->add_option("--corpus", corpus_path)->required();
  embed->add_option("--dim", dim);
  embed->add_option("--weighting", weighting);
  embed->add_option("--vectors", vectors_path, "external vector file instead of SVD");
  embed->add_option("--seed", seed);
  embed->add_option("--out", out)->required();

  // path
  auto* path_cmd = app.add_subcommand("path", "semantic paths of n-gram embeddings");
  std::string emb_path;
  std::size_t ngram_n = 1, stride = 1;
  path_cmd->add_option("--corpus", corpus_path)->required();
  path_cmd->add_option("--embeddings", emb_path)->required();
  path_cmd->add_option("--n", ngram_n);
  path_cmd->add_option("--stride", stride);
  path_cmd->add_option("--out", out)->required();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "cluster the points of every path");
  cluster->set_help_flag("--help", "print this help message and exit");
  std::string paths_dir, algo = "kmeans";
  ClusterConfig cc;
  std::optional<double> dc, fl, fr;
  cluster->add_option("--paths", paths_dir)->required();
  cluster->add_option("--algo", algo);
  cluster->add_option("--k", cc.k);
  cluster->add_option("--k-neighbors", cc.k_neighbors);
  cluster->add_option("--h", cc.h);
  cluster->add_option("--fuzzifier", cc.fuzzifier);
  cluster->add_option("--delta-c", dc);
  cluster->add_option("--l", fl);
  cluster->add_option("--r", fr);
  cluster->add_option("--alpha-levels", cc.alpha_levels);
  cluster->add_option("--sample", cc.sample);
  cluster->add_option("--seed", seed);
  cluster->add_option("--out", out)->required();

  // stats
  auto* stats = app.add_subcommand("stats", "cluster statistics per text");
  std::string labels_path, linkage = "centroid";
  stats->add_option("--paths", paths_dir)->required();
  stats->add_option("--labels", labels_path)->required();
  stats->add_option("--linkage", linkage);
  stats->add_option("--out", out);

  // wilcoxon
  auto* wil = app.add_subcommand("wilcoxon", "rank-sum test between two statistic distributions");
  std::string file_a, file_b, column = "rmsstd", mode = "auto";
  bool paired = false;
  wil->add_option("--a", file_a)->required();
  wil->add_option("--b", file_b)->required();
  wil->add_option("--column", column);
  wil->add_option("--mode", mode, "exact | normal | auto");
  wil->add_flag("--paired", paired, "signed-rank test on row-aligned pairs");

  // ecplane
  auto* ecp = app.add_subcommand("ecplane", "entropy-complexity points per text and (m, n)");
  std::string m_list = "1", n_list = "3..6", sweep_out;
  SweepOptions sweep;
  ecp->add_option("--paths", paths_dir)->required();
  ecp->add_option("--m", m_list);
  ecp->add_option("--n", n_list);
  ecp->add_option("--stride", sweep.stride);
  ecp->add_option("--budget", sweep.pattern_budget);
  ecp->add_option("--margin", sweep.margin_fraction, "fraction of the upper curve maximum");
  ecp->add_option("--sweep", sweep_out, "also write the per-(m, n) sweep table");
  ecp->add_option("--out", out);

  // boundaries
  auto* bnd = app.add_subcommand("boundaries", "lower and upper complexity curves");
  std::size_t bn = 6, bm = 1, samples = 1000;
  bnd->add_option("--n", bn);
  bnd->add_option("--m", bm);
  bnd->add_option("--samples", samples);
  bnd->add_option("--out", out);

  // features
  auto* feat = app.add_subcommand("features", "classifier feature rows from ec.csv or stats.csv");
  std::string ec_file, stats_file;
  std::size_t fm = 1, fn = 3;
  feat->add_option("--ec", ec_file);
  feat->add_option("--stats", stats_file);
  feat->add_option("--m", fm);
  feat->add_option("--n", fn);
  feat->add_option("--corpus", corpus_path)->required();
  feat->add_option("--out", out);

  // train
  auto* train = app.add_subcommand("train", "fit a linear SVC with cross-validated lambda");
  std::string features_path, lambda_list = "1e-4,1e-3,1e-2", report_path;
  std::size_t folds = 5, epochs = 200;
  train->add_option("--features", features_path)->required();
  train->add_option("--lambda-grid", lambda_list);
  train->add_option("--folds", folds);
  train->add_option("--epochs", epochs);
  train->add_option("--seed", seed);
  train->add_option("--report", report_path, "cross-validation report JSON");
  train->add_option("--out", out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "score a model on feature rows");
  std::string model_path;
  eval->add_option("--model", model_path)->required();
  eval->add_option("--features", features_path)->required();

  // run
  auto* run = app.add_subcommand("run", "full pipeline from a config file");
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> run_seed;
  std::string run_out;
  run->add_option("--config", config_path)->required();
  run->add_option("--set", overrides, "key=value override");
  run->add_option("--seed", run_seed);
  run->add_option("--out", run_out);

  // gen-markov
  auto* gen = app.add_subcommand("gen-markov", "order-k Markov texts trained on the inputs");
  std::size_t order = 2, words = 0, count = 0;
  std::string unit = "char";
  gen->add_option("--input", in_dirs);
  gen->add_option("--manifest", in_manifests);
  gen->add_option("--order", order);
  gen->add_option("--unit", unit, "word | char");
  gen->add_option("--words", words, "words per text (0 = match each input)");
  gen->add_option("--count", count, "texts to generate (0 = one per input)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "output directory")->required();

  // plot-data
  auto* plot = app.add_subcommand("plot-data", "plot-ready CSV for a figure");
  std::string kind, input;
  plot->add_option("--kind", kind, "ec-scatter | boundaries | noise-ratio | sweep-heatmap")->required();
  plot->add_option("--input", input)->required();
  plot->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (jobs > 0) omp_set_num_threads(static_cast<int>(jobs));

    if (*ingest) {
      TokenizerConfig rules;
      rules.lowercase = !keep_case;
      rules.strip_punctuation = !keep_punct;
      rules.pretokenized = pretok;
      const Corpus c = build_corpus(read_inputs(in_dirs, in_manifests), rules, min_count);
      save_corpus(c, out);
      std::cout << "docs " << c.docs.size() << " vocab " << c.vocab.size() << "\n";
    } else if (*embed) {
      const Corpus c = load_corpus(corpus_path);
      EmbeddingTable t;
      if (!vectors_path.empty()) {
        t = load_embeddings(vectors_path, c.vocab);
        std::cout << "coverage " << io::format_double(t.coverage()) << " (" << t.covered << "/" << t.vocab_size << ")\n";
      } else {
        SvdOptions opt;
        opt.rank = dim;
        opt.weighting = parse_weighting(weighting);
        opt.seed = seed;
        t = svd_embed(c.counts, opt);
        if (t.rank_clamped) std::cerr << "warning: rank clamped to " << t.dim << "\n";
      }
      save_embeddings(t, c.vocab, out);
    } else if (*path_cmd) {
      const Corpus c = load_corpus(corpus_path);
      const EmbeddingTable t = load_embeddings(emb_path, c.vocab);
      std::vector<SemanticPath> paths;
      for (const auto& d : c.docs) paths.push_back(build_path(d, t, ngram_n, stride));
      save_paths(paths, out);
    } else if (*cluster) {
      cc.algo = parse_algorithm(algo);
      cc.delta_c = dc;
      cc.l = fl;
      cc.r = fr;
      const auto paths = load_paths(paths_dir);
      json texts = json::array();
      std::vector<Clustering> results(paths.size());
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(paths.size()); ++i)
        results[static_cast<std::size_t>(i)] =
            cluster_path(paths[static_cast<std::size_t>(i)], cc, seed + static_cast<std::uint64_t>(i));
      for (std::size_t i = 0; i < paths.size(); ++i)
        texts.push_back({{"doc_id", paths[i].doc_id},
                         {"labels", results[i].labels},
                         {"k_found", results[i].k_found},
                         {"noise_ratio", noise_ratio(results[i].labels)}});
      json j{{"algo", std::string(to_string(cc.algo))},
             {"params",
              {{"k", cc.k}, {"k_neighbors", cc.k_neighbors}, {"h", cc.h}, {"fuzzifier", cc.fuzzifier},
               {"sample", cc.sample}, {"seed", seed}}},
             {"texts", texts}};
      io::write_file(out, j.dump(1) + "\n");
    } else if (*stats) {
      const auto paths = load_paths(paths_dir);
      const json j = json::parse(io::read_file(labels_path));
      std::map<std::string, std::vector<int>> by_id;
      for (const auto& t : j.at("texts")) by_id[t.at("doc_id").get<std::string>()] = t.at("labels").get<std::vector<int>>();
      const Linkage link = parse_linkage(linkage);
      const std::size_t sample = j.at("params").value("sample", std::size_t{0});
      std::vector<StatsRow> rows;
      for (const auto& p : paths) {
        const auto it = by_id.find(p.doc_id);
        if (it == by_id.end()) throw ValidationError("labels file has no entry for '" + p.doc_id + "'");
        Matrix pts = p.points;
        if (sample > 0 && p.length() > sample) {
          pts.resize(static_cast<Eigen::Index>(sample), p.points.cols());
          for (std::size_t r = 0; r < sample; ++r)
            pts.row(static_cast<Eigen::Index>(r)) = p.points.row(static_cast<Eigen::Index>(r * p.length() / sample));
        }
        if (static_cast<std::size_t>(pts.rows()) != it->second.size())
          throw ValidationError("labels for '" + p.doc_id + "' do not match the path length");
        StatsRow row{p.doc_id, p.label, j.at("algo").get<std::string>(), "", cluster_stats(pts, it->second, link)};
        rows.push_back(std::move(row));
      }
      emit(out, stats_csv(rows));
    } else if (*wil) {
      const auto a = finite_column(file_a, column), b = finite_column(file_b, column);
      const auto m = pick_mode(mode, a.size(), b.size());
      const TestResult r = paired ? wilcoxon_signed_rank(a, b, m) : wilcoxon_ranksum(a, b, m);
      std::cout << json{{"statistic", r.statistic}, {"p_value", r.p_value}, {"n_a", a.size()}, {"n_b", b.size()},
                        {"mode", m == PValueMode::exact ? "exact" : "normal"}}.dump() << "\n";
    } else if (*ecp) {
      sweep.m_grid = io::parse_size_list(m_list);
      sweep.n_grid = io::parse_size_list(n_list);
      const auto paths = load_paths(paths_dir);
      const auto points = ec_points(paths, sweep);
      emit(out, ec_csv(points));
      if (!sweep_out.empty()) io::write_file(sweep_out, sweep_csv(summarize_sweep(points, sweep)));
    } else if (*bnd) {
      if (bn < 2 || bm < 1) throw ValidationError("boundaries: need n >= 2 and m >= 1");
      emit(out, boundaries_csv(boundary_curves(alphabet_size(bn, bm), 2), samples));
    } else if (*feat) {
      if (ec_file.empty() == stats_file.empty()) throw ValidationError("features: give exactly one of --ec, --stats");
      const auto labels = corpus_labels(corpus_path);
      if (!ec_file.empty()) {
        const auto rows = ec_feature_rows(io::read_csv(ec_file), fm, fn, labels);
        const std::vector<std::string> names{"H", "C"};
        emit(out, features_csv(rows, names));
      } else {
        const auto rows = cluster_feature_rows(io::read_csv(stats_file), labels);
        const std::vector<std::string> names{"inter_avg", "inter_min", "inter_max"};
        emit(out, features_csv(rows, names));
      }
    } else if (*train) {
      std::vector<std::string> names;
      const auto rows = read_features_csv(features_path, &names);
      CvOptions cv;
      cv.folds = folds;
      cv.lambda_grid = io::parse_double_list(lambda_list);
      cv.seed = seed;
      cv.train.epochs = epochs;
      cv.train.seed = seed;
      CvReport report = cross_validate(rows, cv);
      report.model.feature_names = names;
      save_model(report.model, out);
      if (!report_path.empty()) io::write_file(report_path, cv_report_json(report));
      std::cout << "best_lambda " << io::format_double(report.best_lambda) << " cv_mean "
                << io::format_double(report.best_mean) << " cv_sd " << io::format_double(report.best_sd)
                << " train_accuracy " << io::format_double(report.train_accuracy) << "\n";
    } else if (*eval) {
      const LinearModel model = load_model(model_path);
      std::vector<std::string> names;
      const auto rows = read_features_csv(features_path, &names);
      if (!model.feature_names.empty() && names != model.feature_names)
        throw ValidationError("eval: feature columns do not match the model schema");
      const Confusion c = confusion(model, rows);
      std::cout << json{{"accuracy", accuracy(model, rows)},
                        {"true_pos", c.true_pos}, {"false_neg", c.false_neg},
                        {"false_pos", c.false_pos}, {"true_neg", c.true_neg}}.dump() << "\n";
    } else if (*run) {
      PipelineConfig config = load_config(config_path);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        apply_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (run_seed) config.seed = *run_seed;
      if (!run_out.empty()) config.out_dir = run_out;
      if (jobs > 0) config.jobs = jobs;
      const RunReport report = run_pipeline(config);
      std::cout << run_report_json(report);
    } else if (*gen) {
      const auto raw = read_inputs(in_dirs, in_manifests);
      MarkovGenerator g(order, parse_markov_unit(unit));
      std::vector<std::size_t> lengths;
      std::vector<std::string> ids;
      for (const auto& d : raw) {
        const auto toks = tokenize(d.text);
        std::string joined;
        for (const auto& t : toks) joined += (joined.empty() ? "" : " ") + t;
        g.train(joined);
        lengths.push_back(toks.size());
        ids.push_back(d.id);
      }
      const std::size_t total = count == 0 ? raw.size() : count;
      json manifest = json::array();
      for (std::size_t i = 0; i < total; ++i) {
        const std::size_t src = i % raw.size();
        const std::string id = "bot_" + ids[src] + (count == 0 ? "" : "_" + std::to_string(i));
        const std::string name = id + ".txt";
        io::write_file(fs::path(out) / name, g.generate(words ? words : lengths[src], seed + i) + "\n");
        manifest.push_back({{"id", id}, {"path", name}, {"label", "bot-simple"}});
      }
      io::write_file(fs::path(out) / "manifest.json", manifest.dump(1) + "\n");
    } else if (*plot) {
      emit(out, emit_plot_data(kind, input));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: line " << e.line() << ": " << e.what() << "\n";
    return 1;
  } catch (const IngestError& e) {
    std::cerr << "error: byte " << e.byte_offset() << ": " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
