#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fusewake/eval.hpp"
#include "fusewake/model.hpp"
#include "fusewake/physio.hpp"
#include "fusewake/vision.hpp"

namespace fusewake {

inline constexpr const char* kConfigVersion = "fusewake-config/1";

// Every tunable of the pipeline. JSON keys are flat and match the field
// names; nested module configs are flattened (e.g. "ear_threshold").
struct RunConfig {
  double window_s = 60.0;
  double stride_s = 5.0;
  double align_tolerance_ms = 10.0;

  vision::VisionConfig vision;
  physio::PhysioConfig physio;

  int mi_bins = 10;
  std::size_t select_k = 10;
  double evr_target = 0.95;

  model::TrainConfig train;
  eval::SplitRatios split;
  std::uint64_t split_seed = 42;
  std::size_t cv_folds = 5;
  std::size_t search_budget = 0;
  std::uint64_t search_seed = 42;
  model::SearchSpace search_space;

  double decision_threshold = 0.5;
  double smoothing_alpha = 0.5;
  double alarm_threshold = 0.5;
  int alarm_consecutive = 3;

  // Checks every module precondition against the nominal 256 Hz rate.
  void validate() const;
};

// Missing keys keep their defaults; unknown keys and invalid values throw
// UsageError naming the key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);

}  // namespace fusewake
