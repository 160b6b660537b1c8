#include "fusewake/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fusewake/error.hpp"
#include "fusewake/physio.hpp"
#include "fusewake/rng.hpp"

namespace fusewake::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Rounds to a multiple of 1/scale; dividing last keeps the shortest decimal form.
double quantize(double v, double scale) { return std::round(v * scale) / scale + 0.0; }

// Six-decimal pixel coordinates keep files compact while EAR stays within 1e-7.
double q6(double v) { return quantize(v, 1e6); }

class Ar1 {
 public:
  Ar1(double sd, double dt, double tau) : sd_(sd), rho_(std::exp(-dt / tau)) {}
  double next(Rng& rng) {
    if (sd_ <= 0.0) return 0.0;
    if (!started_) {
      value_ = rng.normal(0.0, sd_);
      started_ = true;
    } else {
      value_ = rho_ * value_ + std::sqrt(1.0 - rho_ * rho_) * sd_ * rng.normal();
    }
    return value_;
  }

 private:
  double sd_, rho_;
  double value_ = 0.0;
  bool started_ = false;
};

EyeLandmarks eye_points(double cx, double cy, double half_width, double ear_value) {
  const double h = ear_value * half_width;
  const double dx = half_width / 2.0;
  return {Point2{q6(cx - half_width), q6(cy)}, Point2{q6(cx - dx), q6(cy - h)}, Point2{q6(cx + dx), q6(cy - h)},
          Point2{q6(cx + half_width), q6(cy)}, Point2{q6(cx + dx), q6(cy + h)}, Point2{q6(cx - dx), q6(cy + h)}};
}

MouthLandmarks mouth_points(double cx, double cy, double half_width, double mar_value) {
  const double v = mar_value * half_width;
  const double dx = half_width / 2.0;
  return {Point2{q6(cx - half_width), q6(cy)}, Point2{q6(cx - dx), q6(cy - v)}, Point2{q6(cx), q6(cy - v)},
          Point2{q6(cx + dx), q6(cy - v)},     Point2{q6(cx + half_width), q6(cy)}, Point2{q6(cx + dx), q6(cy + v)},
          Point2{q6(cx), q6(cy + v)},          Point2{q6(cx - dx), q6(cy + v)}};
}

// Unit-variance band-limited Gaussian noise.
std::vector<double> band_noise(Rng& rng, std::size_t n, double lo, double hi, double fs) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  const double fc = std::sqrt(lo * hi);
  const double q = fc / (hi - lo);
  const physio::Biquad bp = physio::design_bandpass(fc, q, fs);
  const std::array<physio::Biquad, 2> sections = {bp, bp};
  auto y = physio::sosfilt(sections, x);
  const double sd = physio::sample_std(y);
  if (sd > 0.0) {
    for (auto& v : y) v /= sd;
  }
  return y;
}

void apply_clipping(Rng& rng, std::vector<double>& x, double prob, double level) {
  if (prob <= 0.0) return;
  for (auto& v : x) {
    if (rng.bernoulli(prob)) v = rng.bernoulli(0.5) ? level : -level;
  }
}

void check_emission(const StateEmission& e) {
  const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  const auto non_negative = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!non_negative(e.blink_rate_per_min) || !non_negative(e.microsleep_rate_per_min) ||
      !non_negative(e.yawn_rate_per_min) || !non_negative(e.eog_activity)) {
    throw UsageError("event rates must be non-negative");
  }
  if (!positive(e.blink_ms_min) || e.blink_ms_max < e.blink_ms_min || !positive(e.microsleep_s_min) ||
      e.microsleep_s_max < e.microsleep_s_min) {
    throw UsageError("event durations must be positive and ordered");
  }
  if (!positive(e.ear_baseline) || !non_negative(e.ear_noise)) throw UsageError("invalid EAR parameters");
  for (double g : e.eeg_gains) {
    if (!non_negative(g)) throw UsageError("EEG gains must be non-negative");
  }
  if (!positive(e.mean_rr_ms) || !non_negative(e.rr_jitter_ms)) throw UsageError("invalid RR parameters");
}

}  // namespace

GenParams GenParams::defaults() {
  GenParams p;
  p.drowsy.blink_rate_per_min = 8.0;
  p.drowsy.blink_ms_min = 300.0;
  p.drowsy.blink_ms_max = 500.0;
  p.drowsy.microsleep_rate_per_min = 0.5;
  p.drowsy.ear_baseline = 0.28;
  p.drowsy.yawn_rate_per_min = 1.0;
  p.drowsy.eeg_gains = {1.0, 2.0, 2.0, 0.7};
  p.drowsy.mean_rr_ms = 1000.0;
  p.drowsy.rr_jitter_ms = 1.5 * p.alert.rr_jitter_ms;
  p.drowsy.eog_activity = 0.4;
  p.alert.ear_noise = 0.08;
  p.drowsy.ear_noise = 0.09;
  p.ear_drift_sd = 0.06;
  p.eeg_drift_sd = 0.9;
  p.rr_drift_ms = 300.0;
  return p;
}

void GenParams::validate() const {
  for (double p : {p_alert_to_drowsy, p_drowsy_to_alert, landmark_dropout, clip_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("probabilities must lie in [0, 1]");
  }
  if (p_alert_to_drowsy + p_drowsy_to_alert <= 0.0) throw UsageError("transition probabilities are both zero");
  check_emission(alert);
  check_emission(drowsy);
  if (!(drift_tau_s > 0.0)) throw UsageError("drift_tau_s must be positive");
  for (double v : {ear_drift_sd, eeg_drift_sd, rr_drift_ms, eeg_noise_uv, eog_noise_uv, pulse_noise, subject_jitter}) {
    if (!(v >= 0.0)) throw UsageError("noise levels must be non-negative");
  }
  if (!(eeg_amplitude_uv > 0.0)) throw UsageError("eeg_amplitude_uv must be positive");
  if (!(subject_jitter < 1.0)) throw UsageError("subject_jitter must be below 1");
  if (!(fps > 0.0) || !(fs > 0.0)) throw UsageError("rates must be positive");
  if (!(fs / 2.0 > 40.0)) throw UsageError("fs must exceed 80 Hz");
}

std::string session_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "S%03zu", index);
  return buf;
}

std::string subject_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "P%02zu", index);
  return buf;
}

Generated generate_session_with_truth(std::uint64_t seed, double duration_s, const GenParams& params,
                                      std::string id, std::string subject) {
  params.validate();
  if (!(duration_s >= 120.0)) throw UsageError("duration_s must be at least 120");

  Rng master(seed);
  Rng state_rng = master.split(1);
  Rng eye_rng = master.split(2);
  Rng mouth_rng = master.split(3);
  Rng eeg_rng = master.split(4);
  Rng eog_rng = master.split(5);
  Rng pulse_rng = master.split(6);
  Rng artifact_rng = master.split(7);
  Rng drift_rng = master.split(8);

  Generated g;
  auto& s = g.session;
  auto& truth = g.truth;
  s.id = std::move(id);
  s.subject_id = std::move(subject);
  s.fps = params.fps;

  // Hidden state path, one step per second, started from the stationary law.
  const auto steps = static_cast<std::size_t>(std::ceil(duration_s));
  const double pi_drowsy = params.p_alert_to_drowsy / (params.p_alert_to_drowsy + params.p_drowsy_to_alert);
  truth.states.resize(steps);
  truth.states[0] = state_rng.bernoulli(pi_drowsy) ? State::Drowsy : State::Alert;
  for (std::size_t k = 1; k < steps; ++k) {
    const bool drowsy = truth.states[k - 1] == State::Drowsy;
    const bool flip = state_rng.bernoulli(drowsy ? params.p_drowsy_to_alert : params.p_alert_to_drowsy);
    truth.states[k] = (drowsy != flip) ? State::Drowsy : State::Alert;
  }
  const auto state_at = [&](double t) {
    const auto k = std::min(steps - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t))));
    return truth.states[k];
  };
  const auto emission_at = [&](double t) -> const StateEmission& {
    return state_at(t) == State::Drowsy ? params.drowsy : params.alert;
  };

  for (std::size_t k = 0; k < steps; ++k) {
    if (k == 0 || truth.states[k] != truth.states[k - 1]) {
      s.labels.push_back({Timestamp{static_cast<std::int64_t>(k) * 1'000'000}, truth.states[k]});
    }
  }
  for (std::size_t k = 0; k * 30 < steps; ++k) {
    const auto t = static_cast<std::int64_t>(k) * 30'000'000;
    s.sync_markers.push_back({t, t});
  }

  // Video: eye closures, EAR noise, yawns, landmark dropout.
  const double fps = params.fps;
  const auto n_frames = static_cast<std::size_t>(std::llround(duration_s * fps));
  Ar1 ear_drift(params.ear_drift_sd, 1.0 / fps, params.drift_tau_s);
  int closed_left = 0;
  int yawn_left = 0;
  s.frames.reserve(n_frames);
  truth.ear.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) / fps;
    const auto& e = emission_at(t);
    if (closed_left == 0) {
      double closure_s = 0.0;
      if (eye_rng.bernoulli(e.microsleep_rate_per_min / 60.0 / fps)) {
        closure_s = eye_rng.uniform(e.microsleep_s_min, e.microsleep_s_max);
      } else if (eye_rng.bernoulli(e.blink_rate_per_min / 60.0 / fps)) {
        closure_s = eye_rng.uniform(e.blink_ms_min, e.blink_ms_max) / 1000.0;
      }
      if (closure_s > 0.0) {
        closed_left = std::max(1, static_cast<int>(std::lround(closure_s * fps)));
        truth.closures.emplace_back(t, closed_left / fps);
      }
    }
    const double drift = ear_drift.next(drift_rng);
    double ear_value = 0.0;
    if (closed_left > 0) {
      --closed_left;
      ear_value = std::clamp(0.06 + eye_rng.normal(0.0, 0.01), 0.02, 0.12);
    } else {
      ear_value = std::clamp(e.ear_baseline + drift + eye_rng.normal(0.0, e.ear_noise), 0.02, 0.6);
    }

    if (yawn_left == 0 && mouth_rng.bernoulli(e.yawn_rate_per_min / 60.0 / fps)) {
      yawn_left = static_cast<int>(std::lround(mouth_rng.uniform(3.0, 6.0) * fps));
    }
    double mar_value = 0.0;
    if (yawn_left > 0) {
      --yawn_left;
      mar_value = std::clamp(0.8 + mouth_rng.normal(0.0, 0.03), 0.65, 1.2);
    } else {
      mar_value = std::clamp(0.25 + mouth_rng.normal(0.0, 0.03), 0.05, 0.5);
    }

    LandmarkFrame f;
    f.t = Timestamp{std::llround(static_cast<double>(k) * 1e6 / fps)};
    f.valid = !artifact_rng.bernoulli(params.landmark_dropout);
    if (f.valid) {
      const double hx = 5.0 * std::sin(2.0 * kPi * t / 7.0);
      const double hy = 3.0 * std::sin(2.0 * kPi * t / 11.0);
      f.left_eye = eye_points(260.0 + hx, 200.0 + hy, 15.0, ear_value);
      f.right_eye = eye_points(340.0 + hx, 200.0 + hy, 15.0, ear_value);
      f.mouth = mouth_points(300.0 + hx, 280.0 + hy, 25.0, mar_value);
    }
    truth.ear.push_back(ear_value);
    s.frames.push_back(f);
  }

  const double fs = params.fs;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));

  // EEG: four band-limited components with state-dependent amplitude.
  {
    const std::array<std::pair<double, double>, 4> bands = {{{1.0, 4.0}, {4.0, 8.0}, {8.0, 13.0}, {13.0, 30.0}}};
    std::array<std::vector<double>, 4> comps;
    for (std::size_t b = 0; b < 4; ++b) comps[b] = band_noise(eeg_rng, n, bands[b].first, bands[b].second, fs);
    Ar1 slow(params.eeg_drift_sd, 1.0 / fs, params.drift_tau_s);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const auto& e = emission_at(t);
      const double mod = std::exp(slow.next(drift_rng));
      double v = 0.0;
      for (std::size_t b = 0; b < 4; ++b) {
        const double gain = e.eeg_gains[b] * ((b == 1 || b == 2) ? mod : 1.0);
        v += gain * comps[b][i];
      }
      x[i] = params.eeg_amplitude_uv * v + eeg_rng.normal(0.0, params.eeg_noise_uv);
    }
    apply_clipping(artifact_rng, x, params.clip_prob, 50.0 * params.eeg_amplitude_uv);
    for (auto& v : x) v = quantize(v, 1e4);
    s.physio[Channel::EEG].push_back({Channel::EEG, fs, std::move(x), Timestamp{0}});
  }

  // EOG: blink deflections plus saccade steps and noise.
  {
    std::vector<double> x(n, 0.0);
    for (const auto& [start, dur] : truth.closures) {
      const auto i0 = static_cast<std::size_t>(start * fs);
      const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(dur * fs));
      for (std::size_t i = 0; i < len && i0 + i < n; ++i) {
        x[i0 + i] += 100.0 * std::sin(kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(len));
      }
    }
    double position = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& e = emission_at(static_cast<double>(i) / fs);
      if (eog_rng.bernoulli(e.eog_activity / fs)) {
        position = eog_rng.uniform(-60.0, 60.0);
      }
      x[i] += position + eog_rng.normal(0.0, params.eog_noise_uv);
    }
    apply_clipping(artifact_rng, x, params.clip_prob, 2000.0);
    for (auto& v : x) v = quantize(v, 1e4);
    s.physio[Channel::EOG].push_back({Channel::EOG, fs, std::move(x), Timestamp{0}});
  }

  // PULSE: one beat per RR interval; RR follows the state mean.
  {
    Ar1 slow(params.rr_drift_ms, 1.0, params.drift_tau_s);
    double t = pulse_rng.uniform(0.2, 0.6);
    while (t < duration_s) {
      truth.beat_times_s.push_back(t);
      const auto& e = emission_at(t);
      const double rr = std::max(400.0, e.mean_rr_ms + slow.next(drift_rng) + pulse_rng.normal(0.0, e.rr_jitter_ms));
      t += rr / 1000.0;
    }
    // Sharp systolic peak on a slow wave that spans each beat interval.
    std::vector<double> x(n, 0.0);
    constexpr double kWidth = 0.025;
    const auto& beats = truth.beat_times_s;
    for (double beat : beats) {
      const double centre = beat * fs;
      const auto lo = static_cast<std::ptrdiff_t>(std::floor(centre - 4.0 * kWidth * fs));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil(centre + 4.0 * kWidth * fs));
      for (auto i = std::max<std::ptrdiff_t>(0, lo); i <= hi && i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double dt = (static_cast<double>(i) - centre) / fs;
        x[static_cast<std::size_t>(i)] += std::exp(-0.5 * dt * dt / (kWidth * kWidth));
      }
    }
    std::size_t b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ti = static_cast<double>(i) / fs;
      while (b + 1 < beats.size() && beats[b + 1] <= ti) ++b;
      const double next = b + 1 < beats.size() ? beats[b + 1] : beats[b] + (beats[b] - (b ? beats[b - 1] : 0.0));
      const double phase = ti < beats[0] ? (ti - beats[0]) / beats[0] : (ti - beats[b]) / (next - beats[b]);
      x[i] += 0.5 * std::cos(2.0 * kPi * phase);
    }
    for (auto& v : x) v += pulse_rng.normal(0.0, params.pulse_noise);
    apply_clipping(artifact_rng, x, params.clip_prob, 20.0);
    for (auto& v : x) v = quantize(v, 1e4);
    s.physio[Channel::PULSE].push_back({Channel::PULSE, fs, std::move(x), Timestamp{0}});
  }
  return g;
}

Session generate_session(std::uint64_t seed, double duration_s, const GenParams& params, std::string id,
                         std::string subject) {
  return generate_session_with_truth(seed, duration_s, params, std::move(id), std::move(subject)).session;
}

GenParams jitter_params(const GenParams& params, std::uint64_t seed) {
  Rng rng(seed);
  GenParams p = params;
  const double j = params.subject_jitter;
  const auto factor = [&] { return rng.uniform(1.0 - j, 1.0 + j); };
  const auto both = [&](auto member) {
    const double f = factor();
    p.alert.*member *= f;
    p.drowsy.*member *= f;
  };
  both(&StateEmission::blink_rate_per_min);
  {
    const double f = factor();
    for (auto* e : {&p.alert, &p.drowsy}) {
      e->blink_ms_min *= f;
      e->blink_ms_max *= f;
    }
  }
  both(&StateEmission::microsleep_rate_per_min);
  both(&StateEmission::ear_baseline);
  both(&StateEmission::yawn_rate_per_min);
  for (std::size_t b = 0; b < 4; ++b) {
    const double f = factor();
    p.alert.eeg_gains[b] *= f;
    p.drowsy.eeg_gains[b] *= f;
  }
  both(&StateEmission::mean_rr_ms);
  both(&StateEmission::eog_activity);
  return p;
}

std::vector<Session> generate_dataset(std::uint64_t seed, std::size_t n_sessions, std::size_t n_subjects,
                                      const GenParams& params, double duration_s) {
  if (n_subjects < 1 || n_sessions < n_subjects) throw UsageError("need n_sessions >= n_subjects >= 1");
  params.validate();
  std::vector<GenParams> per_subject;
  per_subject.reserve(n_subjects);
  SplitMix64 subject_seeds(seed ^ 0x6A09E667F3BCC908ULL);
  for (std::size_t s = 0; s < n_subjects; ++s) per_subject.push_back(jitter_params(params, subject_seeds.next()));

  std::vector<Session> out;
  out.reserve(n_sessions);
  for (std::size_t i = 0; i < n_sessions; ++i) {
    const auto subj = i % n_subjects;
    out.push_back(generate_session(seed + i, duration_s, per_subject[subj], session_id(i), subject_id(subj)));
  }
  return out;
}

}  // namespace fusewake::synth
