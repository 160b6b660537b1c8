#include "fusewake/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "fusewake/error.hpp"

namespace fusewake {

namespace {

using json = nlohmann::json;

void append_number(std::string& out, double v) {
  char buf[32];
  if (v == 0.0) v = 0.0;  // no "-0"
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

void append_number(std::string& out, std::int64_t v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

void append_string(std::string& out, const std::string& s) { out += json(s).dump(); }

template <std::size_t N>
void append_points(std::string& out, const std::array<Point2, N>& pts, bool valid) {
  out += '[';
  if (valid) {
    for (std::size_t i = 0; i < N; ++i) {
      if (i) out += ',';
      out += '[';
      append_number(out, pts[i].x);
      out += ',';
      append_number(out, pts[i].y);
      out += ']';
    }
  }
  out += ']';
}

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

template <std::size_t N>
void read_points(const json& arr, std::array<Point2, N>& pts, bool valid, std::size_t line,
                 const char* name) {
  if (!arr.is_array()) fail_at(line, std::string(name) + " must be an array");
  if (arr.empty() && !valid) return;
  if (arr.size() != N) {
    fail_at(line, std::string("landmark count: ") + name + " has " + std::to_string(arr.size()) +
                      " points, expected " + std::to_string(N));
  }
  for (std::size_t i = 0; i < N; ++i) {
    const auto& p = arr[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      fail_at(line, std::string(name) + " point must be [x, y]");
    }
    pts[i] = {p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
      fail_at(line, std::string(name) + " has non-finite coordinates");
    }
  }
}

const json& require(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) fail_at(line, std::string("missing field \"") + key + "\"");
  return *it;
}

std::int64_t require_int(const json& rec, const char* key, std::size_t line) {
  const auto& v = require(rec, key, line);
  if (!v.is_number_integer()) fail_at(line, std::string("\"") + key + "\" must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < 0) fail_at(line, std::string("\"") + key + "\" must be non-negative");
  return x;
}

double require_positive(const json& rec, const char* key, std::size_t line) {
  const auto& v = require(rec, key, line);
  if (!v.is_number()) fail_at(line, std::string("\"") + key + "\" must be a number");
  const double x = v.get<double>();
  if (!(x > 0.0) || !std::isfinite(x)) fail_at(line, std::string("\"") + key + "\" must be positive");
  return x;
}

}  // namespace

std::string_view to_string(State s) { return s == State::Drowsy ? "DROWSY" : "ALERT"; }

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::EEG: return "EEG";
    case Channel::EOG: return "EOG";
    case Channel::PULSE: return "PULSE";
  }
  return "?";
}

State parse_state(std::string_view s) {
  if (s == "ALERT") return State::Alert;
  if (s == "DROWSY") return State::Drowsy;
  throw DataError("unknown state \"" + std::string(s) + "\"");
}

Channel parse_channel(std::string_view s) {
  if (s == "EEG") return Channel::EEG;
  if (s == "EOG") return Channel::EOG;
  if (s == "PULSE") return Channel::PULSE;
  throw DataError("unknown channel \"" + std::string(s) + "\"");
}

std::int64_t Session::duration_us() const {
  std::int64_t end = 0;
  if (!frames.empty() && fps > 0) {
    end = frames.back().t.micros + std::llround(1e6 / fps);
  }
  for (const auto& [ch, blocks] : physio) {
    for (const auto& b : blocks) end = std::max<std::int64_t>(end, std::llround(b.end_time_us()));
  }
  return end;
}

double Session::channel_fs(Channel c) const {
  auto it = physio.find(c);
  if (it == physio.end() || it->second.empty()) {
    throw DataError("channel absent: " + std::string(to_string(c)));
  }
  return it->second.front().fs;
}

void validate_session(const Session& s) {
  if (!(s.fps > 0.0)) throw DataError("fps must be positive");
  if (s.frames.empty()) throw DataError("session has no frames");
  if (s.labels.empty()) throw DataError("session has no labels");
  if (s.physio.empty()) throw DataError("session has no physio channels");
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const auto& f = s.frames[i];
    if (f.t.micros < 0) throw DataError("frame " + std::to_string(i) + ": negative timestamp");
    if (i && f.t < s.frames[i - 1].t) {
      throw DataError("frame " + std::to_string(i) + ": non-monotone timestamp");
    }
  }
  for (const auto& [ch, blocks] : s.physio) {
    if (blocks.empty()) throw DataError("channel " + std::string(to_string(ch)) + " has no blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      if (!(b.fs > 0.0)) throw DataError("physio fs must be positive");
      if (b.samples.empty()) throw DataError("empty physio block");
      if (i && b.t0 < blocks[i - 1].t0) {
        throw DataError("channel " + std::string(to_string(ch)) + ": non-monotone block t0");
      }
      for (double x : b.samples) {
        if (!std::isfinite(x)) throw DataError("non-finite physio sample");
      }
    }
  }
  const auto end = s.duration_us();
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (i && s.labels[i].t < s.labels[i - 1].t) throw DataError("non-monotone label timestamp");
    if (s.labels[i].t.micros < 0 || s.labels[i].t.micros >= end) {
      throw DataError("label timestamp outside session duration");
    }
  }
}

Session parse_session(std::string_view text) {
  Session s;
  std::map<Channel, double> declared;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_at(line_no, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) fail_at(line_no, "record must be a JSON object");
    const auto& type_v = require(rec, "type", line_no);
    if (!type_v.is_string()) fail_at(line_no, "\"type\" must be a string");
    const auto type = type_v.get<std::string>();

    if (!have_header) {
      if (type != "header") fail_at(line_no, "first record must be the header");
      have_header = true;
      s.id = require(rec, "id", line_no).get<std::string>();
      s.subject_id = require(rec, "subject_id", line_no).get<std::string>();
      s.fps = require_positive(rec, "fps", line_no);
      for (const auto& c : require(rec, "channels", line_no)) {
        const auto ch = parse_channel(require(c, "name", line_no).get<std::string>());
        declared[ch] = require_positive(c, "fs", line_no);
      }
      if (auto it = rec.find("sync_markers"); it != rec.end()) {
        for (const auto& m : *it) {
          s.sync_markers.push_back(
              {require_int(m, "video_t_us", line_no), require_int(m, "physio_t_us", line_no)});
        }
      }
      continue;
    }

    if (type == "frame") {
      LandmarkFrame f;
      f.t = Timestamp{require_int(rec, "t_us", line_no)};
      const auto& valid = require(rec, "valid", line_no);
      if (!valid.is_boolean()) fail_at(line_no, "\"valid\" must be a boolean");
      f.valid = valid.get<bool>();
      read_points(require(rec, "left_eye", line_no), f.left_eye, f.valid, line_no, "left_eye");
      read_points(require(rec, "right_eye", line_no), f.right_eye, f.valid, line_no, "right_eye");
      read_points(require(rec, "mouth", line_no), f.mouth, f.valid, line_no, "mouth");
      if (!s.frames.empty() && f.t < s.frames.back().t) fail_at(line_no, "non-monotone frame timestamp");
      s.frames.push_back(f);
    } else if (type == "physio") {
      PhysioBlock b;
      try {
        b.channel = parse_channel(require(rec, "channel", line_no).get<std::string>());
      } catch (const DataError& e) {
        fail_at(line_no, e.what());
      }
      auto it = declared.find(b.channel);
      if (it == declared.end()) fail_at(line_no, "channel not declared in header");
      b.fs = it->second;
      b.t0 = Timestamp{require_int(rec, "t0_us", line_no)};
      const auto& samples = require(rec, "samples", line_no);
      if (!samples.is_array()) fail_at(line_no, "\"samples\" must be an array");
      b.samples.reserve(samples.size());
      for (const auto& x : samples) {
        if (!x.is_number()) fail_at(line_no, "samples must be numbers");
        b.samples.push_back(x.get<double>());
      }
      if (b.samples.empty()) fail_at(line_no, "empty physio block");
      auto& blocks = s.physio[b.channel];
      if (!blocks.empty() && b.t0 < blocks.back().t0) fail_at(line_no, "non-monotone block t0");
      blocks.push_back(std::move(b));
    } else if (type == "label") {
      LabelMark m;
      m.t = Timestamp{require_int(rec, "t_us", line_no)};
      try {
        m.state = parse_state(require(rec, "state", line_no).get<std::string>());
      } catch (const DataError& e) {
        fail_at(line_no, e.what());
      }
      if (!s.labels.empty() && m.t < s.labels.back().t) fail_at(line_no, "non-monotone label timestamp");
      s.labels.push_back(m);
    } else if (type == "header") {
      fail_at(line_no, "duplicate header");
    } else {
      fail_at(line_no, "unknown record type \"" + type + "\"");
    }
  }
  if (!have_header) throw DataError("missing header record");
  for (const auto& [ch, fs] : declared) {
    if (!s.physio.contains(ch)) throw DataError("declared channel " + std::string(to_string(ch)) + " has no data");
  }
  validate_session(s);
  return s;
}

Session load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open session file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_session(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_session(const Session& s) {
  std::string out;
  out += R"({"type":"header","id":)";
  append_string(out, s.id);
  out += R"(,"subject_id":)";
  append_string(out, s.subject_id);
  out += R"(,"fps":)";
  append_number(out, s.fps);
  out += R"(,"channels":[)";
  bool first = true;
  for (const auto& [ch, blocks] : s.physio) {
    if (!first) out += ',';
    first = false;
    out += R"({"name":")";
    out += to_string(ch);
    out += R"(","fs":)";
    append_number(out, blocks.empty() ? 0.0 : blocks.front().fs);
    out += '}';
  }
  out += R"(],"sync_markers":[)";
  for (std::size_t i = 0; i < s.sync_markers.size(); ++i) {
    if (i) out += ',';
    out += R"({"video_t_us":)";
    append_number(out, s.sync_markers[i].video_t_us);
    out += R"(,"physio_t_us":)";
    append_number(out, s.sync_markers[i].physio_t_us);
    out += '}';
  }
  out += "]}\n";

  for (const auto& f : s.frames) {
    out += R"({"type":"frame","t_us":)";
    append_number(out, f.t.micros);
    out += R"(,"left_eye":)";
    append_points(out, f.left_eye, f.valid);
    out += R"(,"right_eye":)";
    append_points(out, f.right_eye, f.valid);
    out += R"(,"mouth":)";
    append_points(out, f.mouth, f.valid);
    out += f.valid ? R"(,"valid":true})" : R"(,"valid":false})";
    out += '\n';
  }
  for (const auto& [ch, blocks] : s.physio) {
    for (const auto& b : blocks) {
      out += R"({"type":"physio","channel":")";
      out += to_string(ch);
      out += R"(","t0_us":)";
      append_number(out, b.t0.micros);
      out += R"(,"samples":[)";
      for (std::size_t i = 0; i < b.samples.size(); ++i) {
        if (i) out += ',';
        append_number(out, b.samples[i]);
      }
      out += "]}\n";
    }
  }
  for (const auto& m : s.labels) {
    out += R"({"type":"label","t_us":)";
    append_number(out, m.t.micros);
    out += R"(,"state":")";
    out += to_string(m.state);
    out += "\"}\n";
  }
  return out;
}

void write_session(const Session& session, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write session file: " + path.string());
  const auto text = serialize_session(session);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::int64_t estimate_clock_offset_us(std::span<const SyncMarker> markers) {
  if (markers.empty()) return 0;
  std::vector<std::int64_t> deltas;
  deltas.reserve(markers.size());
  for (const auto& m : markers) deltas.push_back(m.video_t_us - m.physio_t_us);
  std::sort(deltas.begin(), deltas.end());
  const auto n = deltas.size();
  if (n % 2 == 1) return deltas[n / 2];
  const auto lo = deltas[n / 2 - 1];
  const auto hi = deltas[n / 2];
  // hi >= lo, so this is the floor of the midpoint.
  return lo + (hi - lo) / 2;
}

namespace {

double nearest_sample_gap_us(const std::vector<PhysioBlock>& blocks, std::int64_t t_us) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    const double rel = (static_cast<double>(t_us - b.t0.micros)) * b.fs / 1e6;
    const double last = static_cast<double>(b.samples.size() - 1);
    const double idx = std::clamp(std::round(rel), 0.0, last);
    best = std::min(best, std::abs(static_cast<double>(t_us) - b.sample_time_us(static_cast<std::size_t>(idx))));
  }
  return best;
}

}  // namespace

Session align_streams(const Session& session, double tolerance_ms) {
  if (!(tolerance_ms > 0.0)) throw UsageError("tolerance_ms must be positive");
  if (session.frames.empty()) throw DataError("empty stream: video");
  if (session.physio.empty()) throw DataError("empty stream: physio");
  for (const auto& [ch, blocks] : session.physio) {
    if (blocks.empty() || blocks.front().samples.empty()) {
      throw DataError("empty stream: " + std::string(to_string(ch)));
    }
  }

  const auto offset = estimate_clock_offset_us(session.sync_markers);
  const double tol_us = tolerance_ms * 1000.0;
  if (std::abs(static_cast<double>(offset)) > 10.0 * tol_us) {
    throw DataError("estimated clock drift " + std::to_string(offset) +
                    " us exceeds 10x tolerance; capture looks corrupt");
  }

  Session out;
  out.id = session.id;
  out.subject_id = session.subject_id;
  out.fps = session.fps;
  out.physio = session.physio;
  out.labels = session.labels;
  out.sync_markers = session.sync_markers;
  for (auto& m : out.sync_markers) m.video_t_us -= offset;

  out.frames.reserve(session.frames.size());
  for (const auto& f : session.frames) {
    const std::int64_t t = f.t.micros - offset;
    if (t < 0) continue;
    bool covered = true;
    for (const auto& [ch, blocks] : session.physio) {
      if (nearest_sample_gap_us(blocks, t) > tol_us) {
        covered = false;
        break;
      }
    }
    if (!covered) continue;
    auto g = f;
    g.t = Timestamp{t};
    out.frames.push_back(g);
  }
  if (out.frames.empty()) throw DataError("no frames within alignment tolerance");
  return out;
}

State majority_label(std::span<const LabelMark> labels, std::int64_t session_end_us,
                     std::int64_t start_us, std::int64_t end_us) {
  std::int64_t alert = 0;
  std::int64_t drowsy = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto span_lo = labels[i].t.micros;
    const auto span_hi = i + 1 < labels.size() ? labels[i + 1].t.micros : session_end_us;
    const auto overlap = std::min(span_hi, end_us) - std::max(span_lo, start_us);
    if (overlap <= 0) continue;
    (labels[i].state == State::Drowsy ? drowsy : alert) += overlap;
  }
  if (alert == 0 && drowsy == 0) throw DataError("window has no label coverage");
  return drowsy >= alert ? State::Drowsy : State::Alert;
}

std::vector<Window> window_session(const Session& session, double window_s, double stride_s) {
  if (!(stride_s > 0.0) || !(window_s > 0.0)) throw UsageError("window and stride must be positive");
  if (stride_s > window_s) throw UsageError("stride must not exceed window length");
  const auto duration = session.duration_us();
  const auto win_us = Timestamp::from_seconds(window_s).micros;
  const auto stride_us = Timestamp::from_seconds(stride_s).micros;
  if (win_us > duration) throw DataError("window longer than session");

  const auto count = static_cast<std::size_t>((duration - win_us) / stride_us) + 1;
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Window w;
    w.start = Timestamp{static_cast<std::int64_t>(k) * stride_us};
    w.duration_s = window_s;
    w.fps = session.fps;
    const auto lo = w.start.micros;
    const auto hi = lo + win_us;

    auto first = std::lower_bound(session.frames.begin(), session.frames.end(), lo,
                                  [](const LandmarkFrame& f, std::int64_t t) { return f.t.micros < t; });
    auto last = std::lower_bound(first, session.frames.end(), hi,
                                 [](const LandmarkFrame& f, std::int64_t t) { return f.t.micros < t; });
    w.frames = std::span<const LandmarkFrame>(session.frames).subspan(
        static_cast<std::size_t>(first - session.frames.begin()), static_cast<std::size_t>(last - first));

    for (const auto& [ch, blocks] : session.physio) {
      auto& dst = w.physio[ch];
      w.fs[ch] = blocks.front().fs;
      for (const auto& b : blocks) {
        const double n = static_cast<double>(b.samples.size());
        const auto index_at = [&](std::int64_t t) {
          const double rel = static_cast<double>(t - b.t0.micros) * b.fs / 1e6;
          return static_cast<std::size_t>(std::clamp(std::ceil(rel - 1e-9), 0.0, n));
        };
        const auto i0 = index_at(lo);
        const auto i1 = index_at(hi);
        dst.insert(dst.end(), b.samples.begin() + static_cast<std::ptrdiff_t>(i0),
                   b.samples.begin() + static_cast<std::ptrdiff_t>(i1));
      }
    }
    w.label = majority_label(session.labels, duration, lo, hi);
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace fusewake
