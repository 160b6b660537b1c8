#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fusewake {

// Integer microseconds since session start.
struct Timestamp {
  std::int64_t micros = 0;

  constexpr auto operator<=>(const Timestamp&) const = default;

  static constexpr Timestamp from_seconds(double s) {
    return Timestamp{static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))};
  }
  constexpr double seconds() const { return static_cast<double>(micros) * 1e-6; }
};

enum class State { Alert, Drowsy };
enum class Channel { EEG, EOG, PULSE };

inline constexpr std::array<Channel, 3> kAllChannels = {Channel::EEG, Channel::EOG,
                                                        Channel::PULSE};

std::string_view to_string(State s);
std::string_view to_string(Channel c);
State parse_state(std::string_view s);
Channel parse_channel(std::string_view s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// Eye points follow the 6-point convention: p1/p4 corners, p2,p3 upper lid,
// p6,p5 lower lid (p2 above p6, p3 above p5).
using EyeLandmarks = std::array<Point2, 6>;
// Mouth points: m1/m5 corners, m2,m3,m4 upper lip left to right,
// m8,m7,m6 lower lip (pairs m2-m8, m3-m7, m4-m6).
using MouthLandmarks = std::array<Point2, 8>;

struct LandmarkFrame {
  Timestamp t;
  EyeLandmarks left_eye{};
  EyeLandmarks right_eye{};
  MouthLandmarks mouth{};
  bool valid = true;
};

struct PhysioBlock {
  Channel channel = Channel::EEG;
  double fs = 256.0;
  std::vector<double> samples;
  Timestamp t0;

  // Timestamp of sample i, in (fractional) microseconds.
  double sample_time_us(std::size_t i) const {
    return static_cast<double>(t0.micros) + static_cast<double>(i) * 1e6 / fs;
  }
  double end_time_us() const { return sample_time_us(samples.size()); }
};

struct LabelMark {
  Timestamp t;
  State state = State::Alert;
};

// The same physical event observed on the video clock and on the physio clock.
struct SyncMarker {
  std::int64_t video_t_us = 0;
  std::int64_t physio_t_us = 0;
  bool operator==(const SyncMarker&) const = default;
};

struct Session {
  std::string id;
  std::string subject_id;
  double fps = 30.0;
  std::vector<LandmarkFrame> frames;
  std::map<Channel, std::vector<PhysioBlock>> physio;
  std::vector<LabelMark> labels;
  std::vector<SyncMarker> sync_markers;

  // End of the latest stream, in microseconds.
  std::int64_t duration_us() const;
  double duration_s() const { return static_cast<double>(duration_us()) * 1e-6; }
  // Nominal sampling rate of a channel (from its first block).
  double channel_fs(Channel c) const;
};

struct Window {
  Timestamp start;
  double duration_s = 0.0;
  double fps = 30.0;
  std::span<const LandmarkFrame> frames;
  std::map<Channel, std::vector<double>> physio;
  std::map<Channel, double> fs;
  State label = State::Alert;

  Timestamp end() const { return Timestamp{start.micros + Timestamp::from_seconds(duration_s).micros}; }
};

// JSON Lines session files. Reader validates every invariant and reports the
// offending line; writer emits the canonical form (header, frames, physio
// blocks in EEG/EOG/PULSE order, labels).
Session load_session(const std::filesystem::path& path);
Session parse_session(std::string_view text);
void write_session(const Session& session, const std::filesystem::path& path);
std::string serialize_session(const Session& session);
void validate_session(const Session& session);

// Corrects the video clock by the median sync-marker offset, then drops
// frames that are farther than `tolerance_ms` from the nearest sample of any
// physio channel. Throws DataError on an empty stream or when the estimated
// offset exceeds ten times the tolerance.
Session align_streams(const Session& session, double tolerance_ms = 10.0);

// Median (video - physio) offset over the sync markers; 0 without markers.
std::int64_t estimate_clock_offset_us(std::span<const SyncMarker> markers);

// Fixed-stride windows; the returned windows reference `session.frames`, so
// the session must outlive them.
std::vector<Window> window_session(const Session& session, double window_s, double stride_s);

// Majority label over [start, end) by covered duration, ties to Drowsy.
State majority_label(std::span<const LabelMark> labels, std::int64_t session_end_us,
                     std::int64_t start_us, std::int64_t end_us);

}  // namespace fusewake
