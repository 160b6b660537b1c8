#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fusewake/core.hpp"

namespace fusewake::synth {

// Emission parameters for one hidden state.
struct StateEmission {
  double blink_rate_per_min = 15.0;
  double blink_ms_min = 100.0;
  double blink_ms_max = 150.0;
  double microsleep_rate_per_min = 0.0;
  double microsleep_s_min = 1.0;
  double microsleep_s_max = 3.0;
  double ear_baseline = 0.32;
  double ear_noise = 0.02;
  double yawn_rate_per_min = 0.1;
  // Amplitude gains for delta, theta, alpha, beta.
  std::array<double, 4> eeg_gains = {1.0, 1.0, 1.0, 1.0};
  double mean_rr_ms = 850.0;
  double rr_jitter_ms = 30.0;
  // Saccades per second in the EOG.
  double eog_activity = 1.0;
};

struct GenParams {
  // Per-second transition probabilities of the two-state Markov chain.
  double p_alert_to_drowsy = 1.0 / 240.0;
  double p_drowsy_to_alert = 1.0 / 240.0;
  StateEmission alert;
  StateEmission drowsy;

  // Slow AR(1) nuisance processes with time constant drift_tau_s.
  double drift_tau_s = 30.0;
  double ear_drift_sd = 0.0;
  double eeg_drift_sd = 0.0;  // log-amplitude of theta/alpha
  double rr_drift_ms = 0.0;

  double eeg_amplitude_uv = 10.0;
  double eeg_noise_uv = 5.0;
  double eog_noise_uv = 10.0;
  double pulse_noise = 0.05;
  double landmark_dropout = 0.02;
  double clip_prob = 0.01;
  // Relative per-subject jitter on emission means.
  double subject_jitter = 0.10;

  double fps = 30.0;
  double fs = 256.0;

  static GenParams defaults();
  void validate() const;
};

// Values the generator used internally, kept for test oracles.
struct GroundTruth {
  std::vector<State> states;        // one per second
  std::vector<double> ear;          // intended EAR per frame
  std::vector<double> beat_times_s;  // pulse peak times
  std::vector<std::pair<double, double>> closures;  // (start_s, duration_s)
};

struct Generated {
  Session session;
  GroundTruth truth;
};

Generated generate_session_with_truth(std::uint64_t seed, double duration_s, const GenParams& params,
                                      std::string id = "S000", std::string subject_id = "P00");
Session generate_session(std::uint64_t seed, double duration_s, const GenParams& params,
                         std::string id = "S000", std::string subject_id = "P00");

// Jitters every emission mean by a factor in [1 - j, 1 + j], shared by both states.
GenParams jitter_params(const GenParams& params, std::uint64_t seed);

// Sessions assigned round-robin to subjects; session i uses seed + i.
std::vector<Session> generate_dataset(std::uint64_t seed, std::size_t n_sessions, std::size_t n_subjects,
                                      const GenParams& params, double duration_s = 300.0);

std::string session_id(std::size_t index);
std::string subject_id(std::size_t index);

}  // namespace fusewake::synth
