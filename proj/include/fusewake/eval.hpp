#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusewake/core.hpp"

namespace fusewake::eval {

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

// Indices into the session list passed to split_dataset.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Subject-grouped split. `subject_ids[i]` is the subject of session i.
DatasetSplit split_dataset(std::span<const std::string> subject_ids, const SplitRatios& ratios,
                           std::uint64_t seed);
DatasetSplit split_dataset(std::span<const Session> sessions, const SplitRatios& ratios, std::uint64_t seed);

// Positive class is DROWSY.
struct ConfusionMatrix {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const State> predictions, std::span<const State> labels);

struct MetricsReport {
  double accuracy = 0.0;
  // Absent when the denominator is zero.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> auc;
  ConfusionMatrix confusion;
};

// Harmonic mean; absent when either input is absent or both are zero.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

MetricsReport classification_metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

RocCurve roc_auc(std::span<const double> scores, std::span<const State> labels);

struct LatencyStats {
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  std::size_t frames = 0;
};

// Summary of per-frame costs; p95 uses the nearest-rank definition.
LatencyStats latency_stats(std::span<const double> per_frame_ms);

}  // namespace fusewake::eval
