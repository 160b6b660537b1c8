#pragma once

// End-to-end pipeline: window extraction, bundle training, scoring,
// evaluation reports, stream replay and the latency benchmark.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusewake/config.hpp"
#include "fusewake/core.hpp"
#include "fusewake/eval.hpp"
#include "fusewake/fusion.hpp"
#include "fusewake/model.hpp"
#include "fusewake/physio.hpp"
#include "fusewake/serialize.hpp"
#include "fusewake/vision.hpp"

namespace fusewake::pipeline {

inline constexpr const char* kModelVersion = "fusewake-model/1";
inline constexpr const char* kReportVersion = "fusewake-report/1";

struct WindowRecord {
  std::string session_id;
  std::string subject_id;
  std::size_t window_index = 0;
  Timestamp start;
  Timestamp end;
  State label = State::Alert;
  vision::VisionFeatures vision;
  std::optional<physio::PhysioFeatures> physio;
  // Reason the physio features are absent.
  std::string physio_error;

  bool usable() const { return !vision.missing && physio.has_value(); }
};

// Aligns, windows and featurizes one session. Per-window physio failures
// (artifacts, too few peaks) leave `physio` empty instead of throwing.
std::vector<WindowRecord> extract_windows(const Session& session, const RunConfig& cfg);
// Sessions are processed concurrently; output order follows the input.
std::vector<WindowRecord> extract_dataset(std::span<const Session> sessions, const RunConfig& cfg);

struct Head {
  fusion::ScalerStats scaler;
  model::ClassifierModel model;
};

struct ModelBundle {
  RunConfig config;
  fusion::ScalerStats scaler;
  std::vector<std::string> selected_columns;
  fusion::PCAModel pca;
  Head vision;
  Head physio;
  model::ClassifierModel fused_net;
  model::TrainConfig train_config;
  json metrics = json::object();

  void validate() const;
};

json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const json& j);
std::string dump_bundle(const ModelBundle& bundle);
void write_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

// Trains heads and the fused network on usable windows of `train`, with
// `val` driving early stopping. Runs random search first when
// cfg.search_budget > 0, and records cross-validation of the fused net.
ModelBundle train_bundle(std::span<const WindowRecord> train, std::span<const WindowRecord> val,
                         const RunConfig& cfg);
// Subject-grouped split of `sessions`, then the record overload.
ModelBundle train_bundle(std::span<const Session> sessions, const RunConfig& cfg);

struct WindowScores {
  std::optional<double> vision;
  std::optional<double> physio;
  // Feature-level fusion (fused network); needs both modalities.
  std::optional<double> feature;
  // Quality-weighted decision fusion; available when either modality is.
  std::optional<double> decision;
  // Mean of the feature and decision scores.
  std::optional<double> average;
};

WindowScores score_window(const ModelBundle& bundle, const vision::VisionFeatures& fv,
                          const std::optional<physio::PhysioFeatures>& fp);

inline const std::vector<std::string>& path_names() {
  static const std::vector<std::string> kNames = {"vision", "physio", "feature_fusion", "decision_fusion",
                                                  "fusion_average"};
  return kNames;
}

struct PathReport {
  std::string path;
  eval::MetricsReport metrics;
  std::optional<double> fn_fp_ratio;
};

struct EvalReport {
  std::string subset;
  std::size_t sessions = 0;
  std::size_t windows = 0;
  // Windows scored by every path (both modalities present).
  std::size_t scored_windows = 0;
  std::vector<PathReport> paths;

  const PathReport& path(const std::string& name) const;
};

EvalReport evaluate_records(const ModelBundle& bundle, std::span<const WindowRecord> records,
                            std::string subset = "all");

json to_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);

// Test-set sessions of the bundle's split over `sessions`.
std::vector<std::size_t> test_sessions(const ModelBundle& bundle, std::span<const Session> sessions);

// One JSON line per window; `fast` disables real-time pacing.
void stream_session(const ModelBundle& bundle, const Session& session, std::ostream& out, bool fast);

// Per-frame cost of the streaming path with window work amortized over the
// stride. `feature_passes` repeats the feature extraction to scale the load.
eval::LatencyStats latency_benchmark(const ModelBundle& bundle, const Session& session, int feature_passes = 1);

}  // namespace fusewake::pipeline
