#include "fusewake/vision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fusewake/error.hpp"

namespace fusewake::vision {

namespace {

double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool finite_points(std::span<const Point2> pts) {
  return std::all_of(pts.begin(), pts.end(),
                     [](const Point2& p) { return std::isfinite(p.x) && std::isfinite(p.y); });
}

// Calls `on_run(begin, length)` for each maximal run where pred(i) holds.
template <typename Pred, typename OnRun>
void for_each_run(std::size_t n, Pred pred, OnRun on_run) {
  std::size_t i = 0;
  while (i < n) {
    if (!pred(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && pred(j)) ++j;
    on_run(i, j - i);
    i = j;
  }
}

}  // namespace

void VisionConfig::validate() const {
  if (!(ear_threshold > 0.0)) throw UsageError("ear_threshold must be positive");
  if (blink_min_frames < 1) throw UsageError("blink_min_frames must be at least 1");
  if (!(mar_threshold > 0.0)) throw UsageError("mar_threshold must be positive");
  if (!(yawn_min_s > 0.0)) throw UsageError("yawn_min_s must be positive");
}

const std::vector<std::string>& VisionFeatures::names() {
  static const std::vector<std::string> kNames = {"mean_ear",      "min_ear", "blink_rate_per_min",
                                                  "mean_blink_ms", "perclos", "yawn_count"};
  return kNames;
}

std::vector<double> VisionFeatures::values() const {
  return {mean_ear, min_ear, blink_rate_per_min, mean_blink_ms, perclos, yawn_count};
}

double ear(const EyeLandmarks& p) {
  const double width = dist(p[0], p[3]);
  if (!(width > 0.0)) throw DataError("degenerate eye: p1 == p4");
  return (dist(p[1], p[5]) + dist(p[2], p[4])) / (2.0 * width);
}

double mar(const MouthLandmarks& m) {
  const double width = dist(m[0], m[4]);
  if (!(width > 0.0)) throw DataError("degenerate mouth: m1 == m5");
  return (dist(m[1], m[7]) + dist(m[2], m[6]) + dist(m[3], m[5])) / (3.0 * width);
}

std::vector<BlinkEvent> detect_blinks(std::span<const double> ear_series, double fps, double threshold,
                                      int min_frames) {
  if (!(fps > 0.0)) throw UsageError("fps must be positive");
  if (min_frames < 1) throw UsageError("min_frames must be at least 1");
  if (ear_series.empty()) throw DataError("empty EAR series");
  std::vector<BlinkEvent> blinks;
  for_each_run(
      ear_series.size(), [&](std::size_t i) { return ear_series[i] < threshold; },
      [&](std::size_t begin, std::size_t len) {
        if (len < static_cast<std::size_t>(min_frames)) return;
        const int frames = static_cast<int>(len);
        blinks.push_back({begin, frames, frames * 1000.0 / fps});
      });
  return blinks;
}

double perclos(std::span<const double> ear_series, double threshold) {
  if (ear_series.empty()) throw DataError("empty EAR series");
  const auto below = std::count_if(ear_series.begin(), ear_series.end(),
                                   [&](double e) { return e < threshold; });
  return static_cast<double>(below) / static_cast<double>(ear_series.size());
}

int detect_yawns(std::span<const MouthLandmarks> mouth_series, double fps, double mar_threshold,
                 double min_s) {
  if (!(fps > 0.0)) throw UsageError("fps must be positive");
  std::vector<double> ratios;
  ratios.reserve(mouth_series.size());
  for (const auto& m : mouth_series) ratios.push_back(mar(m));
  int yawns = 0;
  for_each_run(
      ratios.size(), [&](std::size_t i) { return ratios[i] > mar_threshold; },
      [&](std::size_t, std::size_t len) {
        if (static_cast<double>(len) / fps >= min_s - 1e-12) ++yawns;
      });
  return yawns;
}

bool frame_ear(const LandmarkFrame& frame, double& out) {
  if (!frame.valid) return false;
  double sum = 0.0;
  int n = 0;
  for (const auto* eye : {&frame.left_eye, &frame.right_eye}) {
    if (!finite_points(*eye) || !(dist((*eye)[0], (*eye)[3]) > 0.0)) continue;
    sum += ear(*eye);
    ++n;
  }
  if (n == 0) return false;
  out = sum / n;
  return true;
}

VisionFeatures vision_features(std::span<const LandmarkFrame> frames, double fps, const VisionConfig& cfg) {
  if (frames.empty()) throw DataError("window contains no frames");
  cfg.validate();
  std::vector<double> ears;
  std::vector<MouthLandmarks> mouths;
  ears.reserve(frames.size());
  for (const auto& f : frames) {
    double e = 0.0;
    if (!frame_ear(f, e)) continue;
    ears.push_back(e);
    if (finite_points(f.mouth) && dist(f.mouth[0], f.mouth[4]) > 0.0) mouths.push_back(f.mouth);
  }

  VisionFeatures out;
  out.quality = static_cast<double>(ears.size()) / static_cast<double>(frames.size());
  if (ears.empty()) return out;

  out.missing = false;
  out.mean_ear = std::accumulate(ears.begin(), ears.end(), 0.0) / static_cast<double>(ears.size());
  out.min_ear = *std::min_element(ears.begin(), ears.end());
  const auto blinks = detect_blinks(ears, fps, cfg.ear_threshold, cfg.blink_min_frames);
  const double minutes = static_cast<double>(ears.size()) / fps / 60.0;
  out.blink_rate_per_min = static_cast<double>(blinks.size()) / minutes;
  if (!blinks.empty()) {
    double total = 0.0;
    for (const auto& b : blinks) total += b.duration_ms;
    out.mean_blink_ms = total / static_cast<double>(blinks.size());
  }
  out.perclos = perclos(ears, cfg.ear_threshold);
  out.yawn_count = detect_yawns(mouths, fps, cfg.mar_threshold, cfg.yawn_min_s);
  return out;
}

VisionFeatures vision_features(const Window& window, const VisionConfig& cfg) {
  return vision_features(window.frames, window.fps, cfg);
}

}  // namespace fusewake::vision
