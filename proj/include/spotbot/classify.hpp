#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spotbot/types.hpp"

namespace spotbot {

/// label is +1 (human) or -1 (bot).
struct FeatureRow {
  std::string doc_id;
  std::vector<double> features;
  int label = 0;
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> scale;
  double lambda = 1e-3;
  std::vector<std::string> feature_names;
  /// Regularized objective after every epoch.
  std::vector<double> objective_history;
};

struct TrainOptions {
  double lambda = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  /// Stop once the objective moved less than this over `plateau_window` epochs.
  double plateau_tol = 1e-6;
  std::size_t plateau_window = 10;
};

/// Minimizes lambda/2 |w|^2 + mean hinge loss on z-scored features by
/// stochastic subgradient descent with step 1/(lambda t), returning the
/// best-objective iterate seen at an epoch boundary.
LinearModel train_svc(std::span<const FeatureRow> rows, const TrainOptions& options);

struct Prediction {
  int label;      // +1 when margin >= 0
  double margin;  // w . z + b
};

Prediction predict(const LinearModel& model, std::span<const double> features);

double svc_objective(const LinearModel& model, std::span<const FeatureRow> rows);
double accuracy(const LinearModel& model, std::span<const FeatureRow> rows);

struct Confusion {
  std::size_t true_pos = 0, false_neg = 0;  // actual +1
  std::size_t false_pos = 0, true_neg = 0;  // actual -1
};
Confusion confusion(const LinearModel& model, std::span<const FeatureRow> rows);

struct CvReport {
  std::vector<double> lambda_grid;
  /// [lambda index][fold] test accuracy.
  std::vector<std::vector<double>> fold_accuracy;
  std::vector<double> mean_accuracy;
  std::vector<double> sd_accuracy;
  double best_lambda = 0.0;
  double best_mean = 0.0;
  double best_sd = 0.0;
  double train_accuracy = 0.0;  // refit on all rows at best lambda
  LinearModel model;
};

struct CvOptions {
  std::size_t folds = 5;
  std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2};
  std::uint64_t seed = 0;
  TrainOptions train;
};

/// Stratified folds assigned by a seeded shuffle within each class.
std::vector<std::size_t> stratified_folds(std::span<const FeatureRow> rows, std::size_t folds,
                                          std::uint64_t seed);

CvReport cross_validate(std::span<const FeatureRow> rows, const CvOptions& options);

struct SplitReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  CvReport cv;
};

/// Stratified hold-out split (test_fraction of each class), CV on the
/// training part, refit, then score the held-out part.
SplitReport train_test_evaluate(std::span<const FeatureRow> rows, double test_fraction,
                                const CvOptions& options);

std::string cv_report_json(const CvReport& report);

void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace spotbot
