#pragma once

#include <span>
#include <string>
#include <vector>

#include "fusewake/core.hpp"

namespace fusewake::physio {

// Butterworth bandpass built as `order` high-pass plus `order` low-pass
// poles, run forward and backward.
struct FilterSpec {
  double lo_hz = 0.5;
  double hi_hz = 40.0;
  int order = 4;

  void validate(double fs) const;
};

// Direct-form II transposed second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

Biquad design_lowpass(double cutoff_hz, double q, double fs);
Biquad design_highpass(double cutoff_hz, double q, double fs);
// Constant 0 dB peak gain band-pass centred on `center_hz`.
Biquad design_bandpass(double center_hz, double q, double fs);
std::vector<Biquad> design_butterworth_bandpass(const FilterSpec& spec, double fs);

// Causal cascade filter; the initial state is the steady state for a constant
// input equal to signal[0].
std::vector<double> sosfilt(std::span<const Biquad> sections, std::span<const double> signal);
// Zero-phase forward-backward filtering with odd-reflection padding.
std::vector<double> sosfiltfilt(std::span<const Biquad> sections, std::span<const double> signal,
                                std::size_t padlen);

std::vector<double> bandpass(std::span<const double> signal, double fs, const FilterSpec& spec);

struct NormalizationStats {
  double mu = 0.0;
  double sigma = 0.0;
};

struct ZScored {
  std::vector<double> values;
  NormalizationStats stats;
};

double mean(std::span<const double> x);
// Sample standard deviation (N - 1).
double sample_std(std::span<const double> x);

ZScored zscore(std::span<const double> signal);

struct BandEdges {
  double lo = 0.0;
  double hi = 0.0;
};

struct BandSet {
  BandEdges delta{0.5, 4.0};
  BandEdges theta{4.0, 8.0};
  BandEdges alpha{8.0, 13.0};
  BandEdges beta{13.0, 30.0};

  void validate(double fs) const;
};

struct BandPowers {
  double delta = 0.0;
  double theta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  double total() const { return delta + theta + alpha + beta; }
  // (theta + alpha) / beta; 0 when beta is 0.
  double slowing_ratio() const { return beta > 0.0 ? (theta + alpha) / beta : 0.0; }
};

struct Spectrum {
  double df = 0.0;
  std::vector<double> psd;  // one-sided density, bin k at k * df

  // Integral of the density over bins with frequency in [lo, hi).
  double power(double lo, double hi) const;
};

// Averaged periodogram: 2 s Hann-tapered segments, 50% overlap, per-segment
// mean removal.
Spectrum welch(std::span<const double> signal, double fs);

BandPowers band_powers(std::span<const double> signal, double fs, const BandSet& bands = {});

struct HRVMetrics {
  double mean_rr_ms = 0.0;
  double sdnn_ms = 0.0;
  double rmssd_ms = 0.0;
};

// Peak sample positions (parabolic sub-sample refinement) of local maxima
// above mean + 0.5 std, at least `refractory_ms` apart.
std::vector<double> detect_pulse_peak_positions(std::span<const double> signal, double fs,
                                                double refractory_ms = 300.0);
// Inter-peak intervals in milliseconds.
std::vector<double> detect_pulse_peaks(std::span<const double> signal, double fs,
                                       double refractory_ms = 300.0);

HRVMetrics hrv_metrics(std::span<const double> rr_ms);

struct PhysioConfig {
  FilterSpec filter;
  BandSet bands;
  double clip_factor = 5.0;
  double max_clip_fraction = 0.2;
  double artifact_history_s = 60.0;
  double refractory_ms = 300.0;

  void validate(double fs) const;
};

// Replaces samples deviating from the trailing-history median by more than
// clip_factor robust standard deviations with linear interpolation between
// clean neighbours. Returns the number of replaced samples.
std::size_t repair_artifacts(std::vector<double>& signal, double fs, const PhysioConfig& cfg);

struct PhysioFeatures {
  BandPowers bands;
  double slowing_ratio = 0.0;
  HRVMetrics hrv;
  double eog_variance = 0.0;
  double eog_zero_crossing_rate = 0.0;
  double quality = 0.0;

  static const std::vector<std::string>& names();
  std::vector<double> values() const;
};

// Throws DataError if a channel is absent and ArtifactRejected if any channel
// has more than max_clip_fraction of its samples replaced.
PhysioFeatures physio_features(const Window& window, const PhysioConfig& cfg);

}  // namespace fusewake::physio
