#include "spotbot/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "spotbot/io.hpp"

namespace spotbot {

using nlohmann::json;

namespace {

void check_rows(std::span<const FeatureRow> rows, bool need_labels) {
  if (rows.empty()) throw ValidationError("classify: no feature rows");
  const std::size_t width = rows.front().features.size();
  if (width == 0) throw ValidationError("classify: empty feature vectors");
  bool pos = false, neg = false;
  for (const auto& r : rows) {
    if (r.features.size() != width) throw ValidationError("classify: ragged feature rows at '" + r.doc_id + "'");
    for (double v : r.features)
      if (!std::isfinite(v)) throw ValidationError("classify: non-finite feature in '" + r.doc_id + "'");
    if (need_labels) {
      if (r.label != 1 && r.label != -1) throw ValidationError("classify: label must be +1 or -1");
      pos |= r.label == 1;
      neg |= r.label == -1;
    }
  }
  if (need_labels && !(pos && neg)) throw ValidationError("classify: both classes must be present");
}

std::vector<double> standardize(const LinearModel& model, std::span<const double> x) {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - model.mean[j]) / model.scale[j];
  return z;
}

double margin_of(const LinearModel& model, std::span<const double> z) {
  double s = model.bias;
  for (std::size_t j = 0; j < z.size(); ++j) s += model.weights[j] * z[j];
  return s;
}

}  // namespace

Prediction predict(const LinearModel& model, std::span<const double> features) {
  if (features.size() != model.weights.size())
    throw ValidationError("predict: expected " + std::to_string(model.weights.size()) + " features, got " +
                          std::to_string(features.size()));
  const auto z = standardize(model, features);
  const double m = margin_of(model, z);
  return {m >= 0.0 ? 1 : -1, m};
}

double svc_objective(const LinearModel& model, std::span<const FeatureRow> rows) {
  double hinge = 0.0;
  for (const auto& r : rows) hinge += std::max(0.0, 1.0 - r.label * predict(model, r.features).margin);
  double norm = model.bias * model.bias;
  for (double w : model.weights) norm += w * w;
  return 0.5 * model.lambda * norm + hinge / static_cast<double>(rows.size());
}

LinearModel train_svc(std::span<const FeatureRow> rows, const TrainOptions& options) {
  check_rows(rows, true);
  if (!(options.lambda > 0.0)) throw ValidationError("train_svc: lambda must be > 0");
  if (options.epochs < 1) throw ValidationError("train_svc: epochs must be >= 1");
  const std::size_t n = rows.size(), d = rows.front().features.size();

  LinearModel model;
  model.lambda = options.lambda;
  model.mean.assign(d, 0.0);
  model.scale.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += r.features[j];
  for (double& m : model.mean) m /= static_cast<double>(n);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) model.scale[j] += (r.features[j] - model.mean[j]) * (r.features[j] - model.mean[j]);
  for (double& s : model.scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) s = 1.0;
  }
  model.weights.assign(d, 0.0);

  std::vector<std::vector<double>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = standardize(model, rows[i].features);

  // Bias rides along as a constant feature, so it shares the penalty.
  std::vector<double> w(d + 1, 0.0);
  const double radius = 1.0 / std::sqrt(options.lambda);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  LinearModel best = model;
  double best_obj = std::numeric_limits<double>::infinity();
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (options.lambda * static_cast<double>(t));
      double m = w[d];
      for (std::size_t j = 0; j < d; ++j) m += w[j] * z[i][j];
      const double y = rows[i].label;
      const double shrink = 1.0 - eta * options.lambda;
      for (double& v : w) v *= shrink;
      if (y * m < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * z[i][j];
        w[d] += eta * y;
      }
      double norm = 0.0;
      for (double v : w) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > radius) {
        for (double& v : w) v *= radius / norm;
      }
    }
    model.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
    model.bias = w[d];
    const double obj = svc_objective(model, rows);
    model.objective_history.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best.weights = model.weights;
      best.bias = model.bias;
    }
    const auto& hist = model.objective_history;
    if (hist.size() > options.plateau_window &&
        std::abs(hist.back() - hist[hist.size() - 1 - options.plateau_window]) < options.plateau_tol)
      break;
  }
  best.objective_history = std::move(model.objective_history);
  return best;
}

double accuracy(const LinearModel& model, std::span<const FeatureRow> rows) {
  if (rows.empty()) throw ValidationError("accuracy: no rows");
  std::size_t hit = 0;
  for (const auto& r : rows) hit += predict(model, r.features).label == r.label;
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

Confusion confusion(const LinearModel& model, std::span<const FeatureRow> rows) {
  Confusion c;
  for (const auto& r : rows) {
    const int p = predict(model, r.features).label;
    if (r.label == 1)
      ++(p == 1 ? c.true_pos : c.false_neg);
    else
      ++(p == 1 ? c.false_pos : c.true_neg);
  }
  return c;
}

std::vector<std::size_t> stratified_folds(std::span<const FeatureRow> rows, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw ValidationError("stratified_folds: need at least 2 folds");
  std::vector<std::size_t> fold(rows.size(), 0);
  std::mt19937_64 rng(seed);
  for (int cls : {1, -1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].label == cls) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) fold[members[k]] = k % folds;
  }
  return fold;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

CvReport cross_validate(std::span<const FeatureRow> rows, const CvOptions& options) {
  check_rows(rows, true);
  if (options.lambda_grid.empty()) throw ValidationError("cross_validate: empty lambda grid");
  const auto fold = stratified_folds(rows, options.folds, options.seed);
  std::vector<std::vector<FeatureRow>> train(options.folds), test(options.folds);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t f = 0; f < options.folds; ++f) (fold[i] == f ? test : train)[f].push_back(rows[i]);
  for (std::size_t f = 0; f < options.folds; ++f) {
    auto has = [](const std::vector<FeatureRow>& part, int cls) {
      return std::any_of(part.begin(), part.end(), [&](const FeatureRow& r) { return r.label == cls; });
    };
    if (!has(test[f], 1) || !has(test[f], -1) || !has(train[f], 1) || !has(train[f], -1))
      throw ValidationError("cross_validate: fold " + std::to_string(f) + " lacks one of the classes");
  }

  CvReport report;
  report.lambda_grid = options.lambda_grid;
  const std::size_t grid = options.lambda_grid.size();
  report.fold_accuracy.assign(grid, std::vector<double>(options.folds, 0.0));
  const auto jobs = static_cast<std::ptrdiff_t>(grid * options.folds);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t g = static_cast<std::size_t>(job) / options.folds;
    const std::size_t f = static_cast<std::size_t>(job) % options.folds;
    TrainOptions topt = options.train;
    topt.lambda = options.lambda_grid[g];
    report.fold_accuracy[g][f] = accuracy(train_svc(train[f], topt), test[f]);
  }
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid; ++g) {
    report.mean_accuracy.push_back(mean_of(report.fold_accuracy[g]));
    report.sd_accuracy.push_back(sd_of(report.fold_accuracy[g]));
    if (report.mean_accuracy[g] > report.mean_accuracy[best]) best = g;
  }
  report.best_lambda = options.lambda_grid[best];
  report.best_mean = report.mean_accuracy[best];
  report.best_sd = report.sd_accuracy[best];
  TrainOptions topt = options.train;
  topt.lambda = report.best_lambda;
  report.model = train_svc(rows, topt);
  report.train_accuracy = accuracy(report.model, rows);
  return report;
}

SplitReport train_test_evaluate(std::span<const FeatureRow> rows, double test_fraction,
                                const CvOptions& options) {
  check_rows(rows, true);
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("train_test_evaluate: test fraction must lie in (0, 1)");
  std::mt19937_64 rng(options.seed ^ 0x5bd1e995ULL);
  std::vector<bool> is_test(rows.size(), false);
  for (int cls : {1, -1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].label == cls) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    for (std::size_t k = 0; k < take; ++k) is_test[members[k]] = true;
  }
  std::vector<FeatureRow> train, test;
  for (std::size_t i = 0; i < rows.size(); ++i) (is_test[i] ? test : train).push_back(rows[i]);
  SplitReport out;
  out.cv = cross_validate(train, options);
  out.train_accuracy = out.cv.train_accuracy;
  out.test_accuracy = accuracy(out.cv.model, test);
  return out;
}

namespace {

json model_json(const LinearModel& model) {
  return json{{"format", "spotbot-model"},
              {"weights", model.weights},
              {"bias", model.bias},
              {"mean", model.mean},
              {"scale", model.scale},
              {"lambda", model.lambda},
              {"features", model.feature_names}};
}

}  // namespace

std::string cv_report_json(const CvReport& report) {
  json j{{"lambda_grid", report.lambda_grid},
         {"fold_accuracy", report.fold_accuracy},
         {"mean_accuracy", report.mean_accuracy},
         {"sd_accuracy", report.sd_accuracy},
         {"best_lambda", report.best_lambda},
         {"best_mean", report.best_mean},
         {"best_sd", report.best_sd},
         {"train_accuracy", report.train_accuracy},
         {"model", model_json(report.model)}};
  return j.dump(2) + "\n";
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  io::write_file(path, model_json(model).dump(2) + "\n");
}

LinearModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("load_model: " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "spotbot-model") throw ValidationError("load_model: not a spotbot model file");
  LinearModel m;
  try {
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.mean = j.at("mean").get<std::vector<double>>();
    m.scale = j.at("scale").get<std::vector<double>>();
    m.lambda = j.at("lambda").get<double>();
    m.feature_names = j.value("features", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("load_model: ") + e.what());
  }
  if (m.mean.size() != m.weights.size() || m.scale.size() != m.weights.size())
    throw ValidationError("load_model: standardization does not match weight count");
  for (double s : m.scale)
    if (!(s > 0.0)) throw ValidationError("load_model: scale entries must be > 0");
  return m;
}

}  // namespace spotbot
