#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusewake/fusion.hpp"

namespace fusewake::model {

using fusion::FeatureMatrix;

enum class ModelKind { Logistic, Mlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

struct TrainConfig {
  double learning_rate = 0.05;
  double l2 = 1e-4;
  int hidden_units = 16;
  int max_epochs = 200;
  int patience = 10;
  int batch_size = 32;
  std::uint64_t seed = 42;

  void validate() const;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double best_val_loss = 0.0;
  // Validation loss at each new best snapshot.
  std::vector<double> best_loss_history;
};

// Parameter layout in `params`:
//   logistic: w[0..d), b
//   mlp:      W1 (hidden x d, row-major), b1[hidden], w2[hidden], b2
// The MLP hidden layer uses tanh.
struct ClassifierModel {
  ModelKind kind = ModelKind::Logistic;
  std::size_t input_dim = 0;
  std::size_t hidden_units = 0;
  std::vector<double> params;
  TrainingInfo info;

  std::size_t param_count() const;
  // Linear weights of a logistic model (no bias).
  std::vector<double> linear_weights() const;
  void validate() const;
};

ClassifierModel init_model(ModelKind kind, std::size_t input_dim, std::size_t hidden_units, std::uint64_t seed);

double sigmoid(double z);
double predict_score(const ClassifierModel& model, std::span<const double> x);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Mean cross-entropy over the rows plus (l2 / 2) * ||weights||^2, biases excluded.
LossGradient loss_and_gradient(const ClassifierModel& model, const FeatureMatrix& batch, double l2);
double mean_cross_entropy(const ClassifierModel& model, const FeatureMatrix& data);

// Largest |analytic - numeric| / max(|analytic|, |numeric|) over all
// parameters, using central differences of the loss. Entries where both
// gradients are below 1e-12 are skipped.
double gradient_check(const ClassifierModel& model, const FeatureMatrix& batch, double eps, double l2 = 0.0);

// Mini-batch gradient descent with learning-rate halving after patience/2
// stale epochs and early stopping after `patience`; returns the best
// validation snapshot. An empty validation set falls back to training loss.
ClassifierModel train_classifier(ModelKind kind, const FeatureMatrix& train, const FeatureMatrix& val,
                                 const TrainConfig& cfg);

// Trainer for RFE: a logistic model fitted to the matrix itself.
fusion::LinearTrainer make_logistic_trainer(const TrainConfig& cfg);

struct FoldResult {
  std::vector<std::string> subjects;
  std::size_t n_rows = 0;
  double accuracy = 0.0;
  std::optional<double> f1;
};

struct CvReport {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  // Folds with undefined F1 contribute 0 to the aggregate.
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
};

// Sorted subject ids assigned round-robin to k folds.
std::vector<std::vector<std::string>> subject_folds(std::span<const std::string> groups, std::size_t k);

CvReport cross_validate(const FeatureMatrix& data, std::size_t k, const TrainConfig& cfg,
                        ModelKind kind = ModelKind::Mlp);

struct SearchSpace {
  std::optional<std::pair<double, double>> learning_rate;  // log-uniform
  std::optional<std::pair<double, double>> l2;             // log-uniform
  std::optional<std::pair<int, int>> hidden_units;         // uniform, inclusive
  std::optional<std::pair<int, int>> batch_size;           // uniform, inclusive

  bool empty() const { return !learning_rate && !l2 && !hidden_units && !batch_size; }
};

struct SearchTrial {
  std::size_t index = 0;
  TrainConfig config;
  double mean_f1 = 0.0;
  double mean_accuracy = 0.0;
};

struct SearchResult {
  TrainConfig best;
  std::vector<SearchTrial> trials;
};

// Samples `budget` configurations (unsampled fields keep `base`), scores each
// by cross-validated mean F1 with trial seed base.seed + index.
SearchResult random_search(const SearchSpace& space, std::size_t budget, const FeatureMatrix& data,
                           const TrainConfig& base, std::uint64_t seed, std::size_t folds = 5,
                           ModelKind kind = ModelKind::Mlp);

struct AlarmEvent {
  std::size_t index = 0;
  double smoothed = 0.0;
};

std::vector<double> ema(std::span<const double> scores, double alpha);

// Fires when the EMA has exceeded `threshold` for `consecutive` steps in a
// row; re-arms once the EMA is no longer above the threshold.
std::vector<AlarmEvent> smooth_and_alarm(std::span<const double> scores, double alpha, double threshold,
                                         int consecutive);

// Incremental form of smooth_and_alarm for streaming.
class AlarmTracker {
 public:
  AlarmTracker(double alpha, double threshold, int consecutive);
  // Returns true when this update fires an alarm.
  bool update(double score);
  double smoothed() const { return ema_; }

 private:
  double alpha_, threshold_;
  int consecutive_;
  bool started_ = false;
  bool armed_ = true;
  int run_ = 0;
  double ema_ = 0.0;
};

}  // namespace fusewake::model
