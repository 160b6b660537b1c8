#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fusewake/core.hpp"

namespace fusewake::vision {

struct BlinkEvent {
  std::size_t onset_frame = 0;
  int duration_frames = 0;
  double duration_ms = 0.0;
};

struct VisionConfig {
  double ear_threshold = 0.2;
  int blink_min_frames = 2;
  double mar_threshold = 0.6;
  double yawn_min_s = 1.5;

  void validate() const;
};

struct VisionFeatures {
  double mean_ear = 0.0;
  double min_ear = 0.0;
  double blink_rate_per_min = 0.0;
  double mean_blink_ms = 0.0;
  double perclos = 0.0;
  double yawn_count = 0.0;
  double quality = 0.0;
  // Set when the window had no usable frame; the numeric fields are then zero.
  bool missing = true;

  static const std::vector<std::string>& names();
  std::vector<double> values() const;
};

// Eye aspect ratio: (|p2-p6| + |p3-p5|) / (2 |p1-p4|).
double ear(const EyeLandmarks& eye);

// Mouth aspect ratio: (|m2-m8| + |m3-m7| + |m4-m6|) / (3 |m1-m5|).
double mar(const MouthLandmarks& mouth);

// Maximal runs of at least `min_frames` consecutive values below `threshold`.
std::vector<BlinkEvent> detect_blinks(std::span<const double> ear_series, double fps, double threshold,
                                      int min_frames);

// Fraction of values below `threshold`.
double perclos(std::span<const double> ear_series, double threshold);

// Number of maximal runs with MAR above `mar_threshold` lasting at least `min_s`.
int detect_yawns(std::span<const MouthLandmarks> mouth_series, double fps, double mar_threshold,
                 double min_s);

// Per-frame EAR: mean of the measurable eyes. Returns false when neither eye
// of a valid frame can be measured.
bool frame_ear(const LandmarkFrame& frame, double& out);

VisionFeatures vision_features(const Window& window, const VisionConfig& cfg);
VisionFeatures vision_features(std::span<const LandmarkFrame> frames, double fps, const VisionConfig& cfg);

}  // namespace fusewake::vision
