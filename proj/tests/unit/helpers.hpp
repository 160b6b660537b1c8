#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fusewake/core.hpp"
#include "fusewake/rng.hpp"

namespace fwtest {

using namespace fusewake;

// Axis-aligned eye with half-width a centred at (cx, cy) and the given EAR.
inline EyeLandmarks make_eye(double ear_value, double cx = 100.0, double cy = 100.0, double a = 15.0) {
  const double h = ear_value * a;
  return {Point2{cx - a, cy},         Point2{cx - a / 3, cy - h}, Point2{cx + a / 3, cy - h},
          Point2{cx + a, cy},         Point2{cx + a / 3, cy + h}, Point2{cx - a / 3, cy + h}};
}

inline MouthLandmarks make_mouth(double mar_value, double cx = 100.0, double cy = 150.0, double a = 20.0) {
  const double h = mar_value * a;
  return {Point2{cx - a, cy},     Point2{cx - a / 2, cy - h}, Point2{cx, cy - h},     Point2{cx + a / 2, cy - h},
          Point2{cx + a, cy},     Point2{cx + a / 2, cy + h}, Point2{cx, cy + h},     Point2{cx - a / 2, cy + h}};
}

inline LandmarkFrame make_frame(std::int64_t t_us, double ear_value, double mar_value = 0.3) {
  LandmarkFrame f;
  f.t = Timestamp{t_us};
  f.left_eye = make_eye(ear_value, 80.0);
  f.right_eye = make_eye(ear_value, 120.0);
  f.mouth = make_mouth(mar_value);
  return f;
}

inline std::vector<double> sine(std::size_t n, double fs, double hz, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / fs + phase);
  return x;
}

inline std::vector<double> white(std::size_t n, Rng& rng, double sd = 1.0) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal(0.0, sd);
  return x;
}

// A valid session of `seconds` with open eyes, noise physio on every channel
// and a single label.
inline Session make_session(double seconds, std::uint64_t seed = 1, State state = State::Alert, double fps = 30.0,
                            double fs = 256.0) {
  Rng rng(seed);
  Session s;
  s.id = "T000";
  s.subject_id = "P00";
  s.fps = fps;
  const auto n_frames = static_cast<std::size_t>(std::llround(seconds * fps));
  for (std::size_t k = 0; k < n_frames; ++k) {
    s.frames.push_back(make_frame(std::llround(k * 1e6 / fps), 0.3));
  }
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  for (auto ch : kAllChannels) {
    PhysioBlock b;
    b.channel = ch;
    b.fs = fs;
    b.samples = white(n, rng);
    s.physio[ch].push_back(std::move(b));
  }
  s.labels.push_back({Timestamp{0}, state});
  return s;
}

// Physio coverage with 25 ms holes placed just after every 10th frame.
inline Session gapped_session(std::int64_t video_shift_us) {
  constexpr double fps = 30.0, fs = 256.0, seconds = 10.0;
  Session s;
  s.id = "G";
  s.subject_id = "P";
  s.fps = fps;
  std::vector<std::pair<double, double>> holes;
  for (int k = 0; k < 300; ++k) {
    const double t = k / fps;
    if (k % 10 == 0) holes.push_back({t + 0.002, t + 0.027});
  }
  auto in_hole = [&](double t) {
    for (auto [lo, hi] : holes) {
      if (t > lo && t < hi) return true;
    }
    return false;
  };
  for (auto ch : kAllChannels) {
    std::vector<PhysioBlock> blocks;
    bool open = false;
    for (int i = 0; i < static_cast<int>(seconds * fs); ++i) {
      const double t = i / fs;
      if (in_hole(t)) {
        open = false;
        continue;
      }
      if (!open) {
        PhysioBlock b;
        b.channel = ch;
        b.fs = fs;
        b.t0 = Timestamp{std::llround(i * 1e6 / fs)};
        blocks.push_back(b);
        open = true;
      }
      blocks.back().samples.push_back(std::sin(t));
    }
    s.physio[ch] = blocks;
  }
  for (int k = 0; k < 300; ++k) s.frames.push_back(make_frame(std::llround(k * 1e6 / fps) + video_shift_us, 0.3));
  s.labels.push_back({Timestamp{0}, State::Alert});
  s.sync_markers = {{0, 0}, {5'000'000, 5'000'000}};
  return s;
}

// Frames whose nearest physio sample (any channel) is farther than tol.
inline std::size_t oracle_dropped(const Session& s, double tol_us) {
  std::vector<double> times;
  for (const auto& [ch, blocks] : s.physio) {
    for (const auto& b : blocks) {
      for (std::size_t i = 0; i < b.samples.size(); ++i) times.push_back(b.sample_time_us(i));
    }
  }
  std::size_t dropped = 0;
  for (const auto& f : s.frames) {
    double best = 1e300;
    for (double t : times) best = std::min(best, std::abs(t - static_cast<double>(f.t.micros)));
    if (best > tol_us) ++dropped;
  }
  return dropped;
}

}  // namespace fwtest
