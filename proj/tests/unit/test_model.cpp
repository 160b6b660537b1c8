#include <cmath>

#include "doctest.h"
#include "fusewake/error.hpp"
#include "fusewake/model.hpp"
#include "fusewake/rng.hpp"

using namespace fusewake;
using namespace fusewake::model;
using fusion::FeatureMatrix;

namespace {

FeatureMatrix blobs(std::uint64_t seed, std::size_t n, std::size_t subjects = 1, double sep = 3.0) {
  Rng rng(seed);
  FeatureMatrix m;
  m.columns = {"x", "y"};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double c = label ? sep : -sep;
    m.add_row({c + rng.normal(0.0, 0.5), c + rng.normal(0.0, 0.5)}, label,
              "s" + std::to_string(i % subjects));
  }
  return m;
}

FeatureMatrix random_batch(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  FeatureMatrix m;
  for (std::size_t j = 0; j < d; ++j) m.columns.push_back("c" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(d);
    for (auto& v : r) v = rng.normal();
    m.add_row(r, static_cast<int>(rng.below(2)));
  }
  return m;
}

// Forward pass written directly from the documented parameter layout.
double oracle_forward(const ClassifierModel& m, const std::vector<double>& x) {
  const std::size_t d = m.input_dim;
  if (m.kind == ModelKind::Logistic) {
    double z = m.params[d];
    for (std::size_t j = 0; j < d; ++j) z += m.params[j] * x[j];
    return 1.0 / (1.0 + std::exp(-z));
  }
  const std::size_t h = m.hidden_units;
  const double* w1 = m.params.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double z = b2;
  for (std::size_t k = 0; k < h; ++k) {
    double a = b1[k];
    for (std::size_t j = 0; j < d; ++j) a += w1[k * d + j] * x[j];
    z += w2[k] * std::tanh(a);
  }
  return 1.0 / (1.0 + std::exp(-z));
}

double accuracy(const ClassifierModel& m, const FeatureMatrix& data) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    ok += (predict_score(m, data.rows[i]) >= 0.5) == (data.labels[i] == 1);
  }
  return static_cast<double>(ok) / static_cast<double>(data.n_rows());
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("separable blobs are learned") {
    const auto train = blobs(1, 400), val = blobs(2, 100);
    for (auto kind : {ModelKind::Logistic, ModelKind::Mlp}) {
      const auto m = train_classifier(kind, train, val, TrainConfig{});
      CHECK(accuracy(m, train) >= 0.99);
    }
  }

  TEST_CASE("single-class labels are rejected") {
    auto train = blobs(1, 100);
    for (auto& y : train.labels) y = 1;
    CHECK_THROWS_AS(train_classifier(ModelKind::Logistic, train, FeatureMatrix{}, TrainConfig{}), DataError);
  }

  TEST_CASE("training is bit-deterministic") {
    const auto train = blobs(3, 300, 1, 1.0), val = blobs(4, 80, 1, 1.0);
    const auto a = train_classifier(ModelKind::Mlp, train, val, TrainConfig{});
    const auto b = train_classifier(ModelKind::Mlp, train, val, TrainConfig{});
    CHECK(a.params == b.params);
    CHECK(a.info.epochs_run == b.info.epochs_run);
  }

  TEST_CASE("best snapshot losses never increase") {
    const auto train = blobs(5, 300, 1, 0.6), val = blobs(6, 100, 1, 0.6);
    const auto m = train_classifier(ModelKind::Mlp, train, val, TrainConfig{});
    const auto& h = m.info.best_loss_history;
    REQUIRE_FALSE(h.empty());
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
    CHECK(m.info.best_val_loss == h.back());
    CHECK(m.info.seed == TrainConfig{}.seed);
    CHECK(m.info.epochs_run <= TrainConfig{}.max_epochs);
  }

  TEST_CASE("divergence is reported") {
    const auto train = blobs(1, 100, 1, 1e200);
    TrainConfig cfg;
    cfg.learning_rate = 1e300;
    CHECK_THROWS_AS(train_classifier(ModelKind::Logistic, train, FeatureMatrix{}, cfg), DataError);
  }

  TEST_CASE("zero weights give 0.5") {
    auto m = init_model(ModelKind::Logistic, 3, 0, 1);
    std::fill(m.params.begin(), m.params.end(), 0.0);
    const std::vector<double> x = {4.0, -2.0, 9.0};
    CHECK(predict_score(m, x) == 0.5);
    auto n = init_model(ModelKind::Mlp, 3, 16, 1);
    std::fill(n.params.begin(), n.params.end(), 0.0);
    CHECK(predict_score(n, x) == 0.5);
  }

  TEST_CASE("score increases along the weight direction") {
    const auto m = init_model(ModelKind::Logistic, 4, 0, 7);
    const auto w = m.linear_weights();
    double prev = -1.0;
    for (int s = -10; s <= 10; ++s) {
      std::vector<double> x(4);
      for (std::size_t j = 0; j < 4; ++j) x[j] = 0.3 * s * w[j];
      const double p = predict_score(m, x);
      CHECK(p > prev);
      prev = p;
    }
  }

  TEST_CASE("forward pass matches the oracle") {
    Rng rng(10);
    for (auto kind : {ModelKind::Logistic, ModelKind::Mlp}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = init_model(kind, 7, 16, seed);
        std::vector<double> x(7);
        for (auto& v : x) v = rng.normal();
        CHECK(std::abs(predict_score(m, x) - oracle_forward(m, x)) < 1e-12);
      }
    }
    const auto m = init_model(ModelKind::Mlp, 7, 16, 1);
    const std::vector<double> bad(6, 0.0);
    CHECK_THROWS_AS(predict_score(m, bad), UsageError);
  }

  TEST_CASE("glorot initialisation bounds") {
    const auto m = init_model(ModelKind::Mlp, 10, 16, 3);
    const double r1 = std::sqrt(6.0 / 26.0);
    for (std::size_t i = 0; i < 160; ++i) CHECK(std::abs(m.params[i]) <= r1);
    CHECK(m.param_count() == 10 * 16 + 16 + 16 + 1);
  }

  TEST_CASE("gradient checks") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto batch = random_batch(seed, 32, 6);
      CHECK(gradient_check(init_model(ModelKind::Logistic, 6, 0, seed), batch, 1e-5) < 1e-6);
      CHECK(gradient_check(init_model(ModelKind::Mlp, 6, 16, seed), batch, 1e-5) < 1e-4);
    }
    const auto batch = random_batch(1, 4, 2);
    CHECK_THROWS_AS(gradient_check(init_model(ModelKind::Logistic, 2, 0, 1), batch, 1e-2), UsageError);
  }

  TEST_CASE("gradient check includes the L2 term") {
    const auto batch = random_batch(3, 32, 5);
    CHECK(gradient_check(init_model(ModelKind::Mlp, 5, 16, 3), batch, 1e-5, 0.1) < 1e-4);
  }

  TEST_CASE("zero inputs give exactly zero input-weight gradients") {
    FeatureMatrix z;
    z.columns = {"a", "b", "c"};
    for (int i = 0; i < 8; ++i) z.add_row({0.0, 0.0, 0.0}, i % 2);
    const auto lg = loss_and_gradient(init_model(ModelKind::Mlp, 3, 16, 2), z, 0.0);
    for (std::size_t i = 0; i < 48; ++i) CHECK(lg.gradient[i] == 0.0);
    const auto ll = loss_and_gradient(init_model(ModelKind::Logistic, 3, 0, 2), z, 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ll.gradient[i] == 0.0);
  }

  TEST_CASE("cross validation with 50 subjects and 5 folds") {
    const auto data = blobs(7, 500, 50, 1.0);
    TrainConfig cfg;
    cfg.max_epochs = 20;
    cfg.patience = 5;
    const auto folds = subject_folds(data.groups, 5);
    REQUIRE(folds.size() == 5);
    std::vector<std::string> all;
    for (const auto& f : folds) {
      CHECK(f.size() == 10);
      all.insert(all.end(), f.begin(), f.end());
    }
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == 50);
    const auto r = cross_validate(data, 5, cfg, ModelKind::Logistic);
    REQUIRE(r.folds.size() == 5);
    std::size_t rows = 0;
    for (const auto& f : r.folds) {
      CHECK(f.subjects.size() == 10);
      rows += f.n_rows;
    }
    CHECK(rows == 500);
    CHECK(r.mean_accuracy > 0.9);
  }

  TEST_CASE("more folds than subjects") {
    const auto data = blobs(7, 40, 3);
    CHECK_THROWS_AS(cross_validate(data, 5, TrainConfig{}), DataError);
  }

  TEST_CASE("random search") {
    const auto data = blobs(9, 200, 10, 0.8);
    TrainConfig base;
    base.max_epochs = 15;
    base.patience = 4;
    SearchSpace space;
    space.learning_rate = std::pair{0.01, 0.5};
    space.hidden_units = std::pair{4, 8};
    const auto one = random_search(space, 1, data, base, 5, 3);
    REQUIRE(one.trials.size() == 1);
    CHECK(one.best.learning_rate == one.trials[0].config.learning_rate);
    CHECK(one.trials[0].config.seed == base.seed);
    CHECK(one.best.l2 == base.l2);
    const auto a = random_search(space, 4, data, base, 5, 3);
    const auto b = random_search(space, 4, data, base, 5, 3);
    REQUIRE(a.trials.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(a.trials[i].config.learning_rate == b.trials[i].config.learning_rate);
      CHECK(a.trials[i].mean_f1 == b.trials[i].mean_f1);
      CHECK(a.trials[i].config.seed == base.seed + i);
      CHECK(a.trials[i].config.learning_rate >= 0.01);
      CHECK(a.trials[i].config.learning_rate <= 0.5);
      CHECK(a.trials[i].config.hidden_units >= 4);
      CHECK(a.trials[i].config.hidden_units <= 8);
    }
    CHECK_THROWS_AS(random_search(SearchSpace{}, 3, data, base, 5, 3), UsageError);
    CHECK_THROWS_AS(random_search(space, 0, data, base, 5, 3), UsageError);
  }

  TEST_CASE("ema and alarms") {
    const std::vector<double> s = {0.1, 0.9, 0.4, 0.7};
    CHECK(ema(s, 1.0) == s);
    const std::vector<double> high(6, 0.9);
    const auto a = smooth_and_alarm(high, 0.5, 0.5, 3);
    REQUIRE(a.size() == 1);
    CHECK(a[0].index == 2);
    CHECK(a[0].smoothed > 0.5);
    const std::vector<double> low(10, 0.2);
    CHECK(smooth_and_alarm(low, 0.5, 0.5, 1).empty());
    CHECK_THROWS_AS(smooth_and_alarm({}, 0.5, 0.5, 1), UsageError);
    CHECK_THROWS_AS(smooth_and_alarm(s, 0.0, 0.5, 1), UsageError);
  }

  TEST_CASE("alarm re-arms after dropping below the threshold") {
    const std::vector<double> s = {0.9, 0.9, 0.1, 0.9, 0.9};
    const auto a = smooth_and_alarm(s, 1.0, 0.5, 2);
    REQUIRE(a.size() == 2);
    CHECK(a[0].index == 1);
    CHECK(a[1].index == 4);
    AlarmTracker t(1.0, 0.5, 2);
    std::vector<std::size_t> fired;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (t.update(s[i])) fired.push_back(i);
    }
    CHECK(fired == std::vector<std::size_t>{1, 4});
  }

  TEST_CASE("model kind names") {
    CHECK(to_string(ModelKind::Mlp) == "MLP");
    CHECK(parse_model_kind("LOGISTIC") == ModelKind::Logistic);
    CHECK_THROWS(parse_model_kind("cnn"));
  }

  TEST_CASE("train config validation") {
    TrainConfig c;
    c.patience = c.max_epochs;
    CHECK_THROWS_AS(c.validate(), UsageError);
  }
}
