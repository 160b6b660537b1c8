#include "fusewake/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "fusewake/error.hpp"
#include "fusewake/eval.hpp"
#include "fusewake/rng.hpp"

namespace fusewake::model {

namespace {

// log(1 + e^z) - y z, stable for large |z|.
double cross_entropy(double z, int y) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - static_cast<double>(y) * z;
}

struct Forward {
  std::vector<double> hidden;  // tanh activations (MLP only)
  double z = 0.0;
};

Forward forward(const ClassifierModel& m, std::span<const double> x) {
  Forward f;
  const std::size_t d = m.input_dim;
  const auto& p = m.params;
  if (m.kind == ModelKind::Logistic) {
    double z = p[d];
    for (std::size_t i = 0; i < d; ++i) z += p[i] * x[i];
    f.z = z;
    return f;
  }
  const std::size_t h = m.hidden_units;
  const double* w1 = p.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  f.hidden.resize(h);
  double z = b2;
  for (std::size_t j = 0; j < h; ++j) {
    double a = b1[j];
    const double* row = w1 + j * d;
    for (std::size_t i = 0; i < d; ++i) a += row[i] * x[i];
    f.hidden[j] = std::tanh(a);
    z += w2[j] * f.hidden[j];
  }
  f.z = z;
  return f;
}

bool is_weight(const ClassifierModel& m, std::size_t idx) {
  if (m.kind == ModelKind::Logistic) return idx < m.input_dim;
  const std::size_t h = m.hidden_units, d = m.input_dim;
  return idx < h * d || (idx >= h * d + h && idx < h * d + 2 * h);
}

void check_dims(const ClassifierModel& m, const FeatureMatrix& data) {
  if (data.n_cols() != m.input_dim) throw UsageError("dimension mismatch");
}

void check_two_classes(const FeatureMatrix& data) {
  const auto pos = std::count(data.labels.begin(), data.labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(data.labels.size())) {
    throw DataError("single-class training labels");
  }
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::Mlp ? "MLP" : "LOGISTIC"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "MLP") return ModelKind::Mlp;
  if (s == "LOGISTIC") return ModelKind::Logistic;
  throw DataError("unknown model kind \"" + s + "\"");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (!(l2 >= 0.0)) throw UsageError("l2 must be non-negative");
  if (hidden_units < 1) throw UsageError("hidden_units must be positive");
  if (max_epochs < 1) throw UsageError("max_epochs must be positive");
  if (patience < 1) throw UsageError("patience must be positive");
  if (patience >= max_epochs) throw UsageError("patience must be less than max_epochs");
  if (batch_size < 1) throw UsageError("batch_size must be positive");
}

std::size_t ClassifierModel::param_count() const {
  if (kind == ModelKind::Logistic) return input_dim + 1;
  return hidden_units * input_dim + 2 * hidden_units + 1;
}

std::vector<double> ClassifierModel::linear_weights() const {
  if (kind != ModelKind::Logistic) throw UsageError("linear weights exist only for logistic models");
  return {params.begin(), params.begin() + static_cast<std::ptrdiff_t>(input_dim)};
}

void ClassifierModel::validate() const {
  if (input_dim == 0) throw DataError("model input dimension must be positive");
  if (kind == ModelKind::Mlp && hidden_units == 0) throw DataError("MLP needs hidden units");
  if (params.size() != param_count()) throw DataError("model weight count inconsistent with dimensions");
  for (double p : params) {
    if (!std::isfinite(p)) throw DataError("non-finite model weight");
  }
}

ClassifierModel init_model(ModelKind kind, std::size_t input_dim, std::size_t hidden_units, std::uint64_t seed) {
  if (input_dim == 0) throw UsageError("input dimension must be positive");
  ClassifierModel m;
  m.kind = kind;
  m.input_dim = input_dim;
  m.hidden_units = kind == ModelKind::Mlp ? hidden_units : 0;
  m.params.assign(m.param_count(), 0.0);
  m.info.seed = seed;
  Rng rng(seed);
  const auto glorot = [&](double fan_in, double fan_out) {
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    return rng.uniform(-r, r);
  };
  const double d = static_cast<double>(input_dim);
  if (kind == ModelKind::Logistic) {
    for (std::size_t i = 0; i < input_dim; ++i) m.params[i] = glorot(d, 1.0);
  } else {
    const std::size_t h = m.hidden_units;
    for (std::size_t i = 0; i < h * input_dim; ++i) m.params[i] = glorot(d, static_cast<double>(h));
    for (std::size_t j = 0; j < h; ++j) m.params[h * input_dim + h + j] = glorot(static_cast<double>(h), 1.0);
  }
  return m;
}

double sigmoid(double z) {
  const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  // Keep the score strictly inside (0, 1) for finite weights.
  return std::clamp(s, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

double predict_score(const ClassifierModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim) throw UsageError("dimension mismatch");
  return sigmoid(forward(model, x).z);
}

LossGradient loss_and_gradient(const ClassifierModel& m, const FeatureMatrix& batch, double l2) {
  check_dims(m, batch);
  if (batch.n_rows() == 0) throw UsageError("empty batch");
  LossGradient out;
  out.gradient.assign(m.params.size(), 0.0);
  const std::size_t d = m.input_dim, h = m.hidden_units;
  const double inv_n = 1.0 / static_cast<double>(batch.n_rows());
  auto& g = out.gradient;

  for (std::size_t r = 0; r < batch.n_rows(); ++r) {
    const auto& x = batch.rows[r];
    const int y = batch.labels[r];
    const auto f = forward(m, x);
    out.loss += cross_entropy(f.z, y) * inv_n;
    const double dz = (sigmoid(f.z) - static_cast<double>(y)) * inv_n;
    if (m.kind == ModelKind::Logistic) {
      for (std::size_t i = 0; i < d; ++i) g[i] += dz * x[i];
      g[d] += dz;
      continue;
    }
    const double* w2 = m.params.data() + h * d + h;
    double* gw1 = g.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    for (std::size_t j = 0; j < h; ++j) {
      gw2[j] += dz * f.hidden[j];
      const double da = dz * w2[j] * (1.0 - f.hidden[j] * f.hidden[j]);
      gb1[j] += da;
      double* row = gw1 + j * d;
      for (std::size_t i = 0; i < d; ++i) row[i] += da * x[i];
    }
    gw2[h] += dz;
  }
  if (l2 > 0.0) {
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      if (!is_weight(m, i)) continue;
      out.loss += 0.5 * l2 * m.params[i] * m.params[i];
      g[i] += l2 * m.params[i];
    }
  }
  return out;
}

double mean_cross_entropy(const ClassifierModel& m, const FeatureMatrix& data) {
  check_dims(m, data);
  if (data.n_rows() == 0) throw UsageError("empty data");
  double loss = 0.0;
  for (std::size_t r = 0; r < data.n_rows(); ++r) loss += cross_entropy(forward(m, data.rows[r]).z, data.labels[r]);
  return loss / static_cast<double>(data.n_rows());
}

double gradient_check(const ClassifierModel& model, const FeatureMatrix& batch, double eps, double l2) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw UsageError("eps must lie in [1e-7, 1e-3]");
  const auto analytic = loss_and_gradient(model, batch, l2).gradient;
  auto probe = model;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    const double saved = probe.params[i];
    probe.params[i] = saved + eps;
    const double up = loss_and_gradient(probe, batch, l2).loss;
    probe.params[i] = saved - eps;
    const double down = loss_and_gradient(probe, batch, l2).loss;
    probe.params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
    if (scale < 1e-12) continue;
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

ClassifierModel train_classifier(ModelKind kind, const FeatureMatrix& train, const FeatureMatrix& val,
                                 const TrainConfig& cfg) {
  cfg.validate();
  if (train.n_rows() == 0) throw DataError("empty training set");
  check_two_classes(train);
  if (val.n_rows() > 0 && val.n_cols() != train.n_cols()) throw UsageError("dimension mismatch");

  auto model = init_model(kind, train.n_cols(), static_cast<std::size_t>(cfg.hidden_units), cfg.seed);
  Rng rng(cfg.seed ^ 0x5DEECE66DULL);
  const FeatureMatrix& monitor = val.n_rows() > 0 ? val : train;

  std::vector<std::size_t> order(train.n_rows());
  std::iota(order.begin(), order.end(), 0);
  FeatureMatrix batch;
  batch.columns = train.columns;

  double lr = cfg.learning_rate;
  double best = std::numeric_limits<double>::infinity();
  auto best_params = model.params;
  int stale = 0;
  int since_decay = 0;
  const int decay_after = std::max(1, cfg.patience / 2);
  int epoch = 0;
  std::vector<double> history;

  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.rows.clear();
      batch.labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.rows.push_back(train.rows[order[k]]);
        batch.labels.push_back(train.labels[order[k]]);
      }
      const auto lg = loss_and_gradient(model, batch, cfg.l2);
      if (!std::isfinite(lg.loss)) throw DataError("non-finite loss (training diverged)");
      for (std::size_t p = 0; p < model.params.size(); ++p) model.params[p] -= lr * lg.gradient[p];
    }
    const double loss = mean_cross_entropy(model, monitor);
    if (!std::isfinite(loss)) throw DataError("non-finite loss (training diverged)");
    if (loss < best) {
      best = loss;
      best_params = model.params;
      history.push_back(loss);
      stale = 0;
      since_decay = 0;
      continue;
    }
    ++stale;
    if (++since_decay >= decay_after) {
      lr *= 0.5;
      since_decay = 0;
    }
    if (stale >= cfg.patience) break;
  }
  model.params = best_params;
  model.info.epochs_run = std::min(epoch, cfg.max_epochs);
  model.info.best_val_loss = best;
  model.info.best_loss_history = std::move(history);
  return model;
}

fusion::LinearTrainer make_logistic_trainer(const TrainConfig& cfg) {
  return [cfg](const FeatureMatrix& m) {
    return train_classifier(ModelKind::Logistic, m, m, cfg).linear_weights();
  };
}

std::vector<std::vector<std::string>> subject_folds(std::span<const std::string> groups, std::size_t k) {
  if (k < 2) throw UsageError("cross-validation needs k >= 2");
  const std::set<std::string> unique(groups.begin(), groups.end());
  if (unique.size() < k) throw DataError("fewer subjects than folds");
  std::vector<std::vector<std::string>> folds(k);
  std::size_t i = 0;
  for (const auto& s : unique) folds[i++ % k].push_back(s);
  return folds;
}

CvReport cross_validate(const FeatureMatrix& data, std::size_t k, const TrainConfig& cfg, ModelKind kind) {
  const auto folds = subject_folds(data.groups, k);
  CvReport report;
  std::vector<double> accs, f1s;
  for (const auto& fold : folds) {
    std::vector<std::size_t> tr, va;
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
      const bool held = std::find(fold.begin(), fold.end(), data.groups[r]) != fold.end();
      (held ? va : tr).push_back(r);
    }
    const auto train = data.select_rows(tr);
    const auto val = data.select_rows(va);
    const auto model = train_classifier(kind, train, val, cfg);
    std::vector<State> pred, truth;
    for (std::size_t r = 0; r < val.n_rows(); ++r) {
      pred.push_back(predict_score(model, val.rows[r]) > 0.5 ? State::Drowsy : State::Alert);
      truth.push_back(val.labels[r] ? State::Drowsy : State::Alert);
    }
    FoldResult fr;
    fr.subjects = fold;
    fr.n_rows = val.n_rows();
    if (!pred.empty()) {
      const auto m = eval::classification_metrics(eval::confusion(pred, truth));
      fr.accuracy = m.accuracy;
      fr.f1 = m.f1;
    }
    accs.push_back(fr.accuracy);
    f1s.push_back(fr.f1.value_or(0.0));
    report.folds.push_back(std::move(fr));
  }
  report.mean_accuracy = mean_of(accs);
  report.std_accuracy = pop_std(accs);
  report.mean_f1 = mean_of(f1s);
  report.std_f1 = pop_std(f1s);
  return report;
}

SearchResult random_search(const SearchSpace& space, std::size_t budget, const FeatureMatrix& data,
                           const TrainConfig& base, std::uint64_t seed, std::size_t folds, ModelKind kind) {
  if (space.empty()) throw UsageError("empty search space");
  if (budget < 1) throw UsageError("budget must be at least 1");
  Rng rng(seed);
  const auto log_uniform = [&](std::pair<double, double> r) {
    if (!(r.first > 0.0 && r.second >= r.first)) throw UsageError("log-uniform range must be positive and ordered");
    return std::exp(rng.uniform(std::log(r.first), std::log(r.second)));
  };
  const auto int_uniform = [&](std::pair<int, int> r) {
    if (r.second < r.first) throw UsageError("integer range must be ordered");
    return r.first + static_cast<int>(rng.below(static_cast<std::uint64_t>(r.second - r.first + 1)));
  };

  SearchResult result;
  for (std::size_t t = 0; t < budget; ++t) {
    SearchTrial trial;
    trial.index = t;
    trial.config = base;
    if (space.learning_rate) trial.config.learning_rate = log_uniform(*space.learning_rate);
    if (space.l2) trial.config.l2 = log_uniform(*space.l2);
    if (space.hidden_units) trial.config.hidden_units = int_uniform(*space.hidden_units);
    if (space.batch_size) trial.config.batch_size = int_uniform(*space.batch_size);
    trial.config.seed = base.seed + t;
    const auto cv = cross_validate(data, folds, trial.config, kind);
    trial.mean_f1 = cv.mean_f1;
    trial.mean_accuracy = cv.mean_accuracy;
    result.trials.push_back(trial);
  }
  std::size_t best = 0;
  for (std::size_t t = 1; t < result.trials.size(); ++t) {
    if (result.trials[t].mean_f1 > result.trials[best].mean_f1) best = t;
  }
  result.best = result.trials[best].config;
  return result;
}

std::vector<double> ema(std::span<const double> scores, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in (0, 1]");
  std::vector<double> out;
  out.reserve(scores.size());
  for (std::size_t t = 0; t < scores.size(); ++t) {
    out.push_back(t == 0 ? scores[0] : alpha * scores[t] + (1.0 - alpha) * out.back());
  }
  return out;
}

AlarmTracker::AlarmTracker(double alpha, double threshold, int consecutive)
    : alpha_(alpha), threshold_(threshold), consecutive_(consecutive) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in (0, 1]");
  if (consecutive < 1) throw UsageError("consecutive must be at least 1");
}

bool AlarmTracker::update(double score) {
  ema_ = started_ ? alpha_ * score + (1.0 - alpha_) * ema_ : score;
  started_ = true;
  if (!(ema_ > threshold_)) {
    run_ = 0;
    armed_ = true;
    return false;
  }
  ++run_;
  if (armed_ && run_ >= consecutive_) {
    armed_ = false;
    return true;
  }
  return false;
}

std::vector<AlarmEvent> smooth_and_alarm(std::span<const double> scores, double alpha, double threshold,
                                         int consecutive) {
  if (scores.empty()) throw UsageError("empty score series");
  AlarmTracker tracker(alpha, threshold, consecutive);
  std::vector<AlarmEvent> alarms;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (tracker.update(scores[t])) alarms.push_back({t, tracker.smoothed()});
  }
  return alarms;
}

}  // namespace fusewake::model
