#include "fusewake/physio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "fusewake/error.hpp"

namespace fusewake::physio {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per length and never destroyed.
fftw_plan r2c_plan(int n) {
  static std::mutex mu;
  static std::map<int, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<double> in(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  auto plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, plan);
  return plan;
}

// Butterworth pole-pair quality factors for an even order.
std::vector<double> butterworth_q(int order) {
  std::vector<double> q;
  for (int k = 1; k <= order / 2; ++k) {
    q.push_back(1.0 / (2.0 * std::cos((2.0 * k - 1.0) * kPi / (2.0 * order))));
  }
  return q;
}

struct Rbj {
  double cosw, alpha;
  Rbj(double f, double q, double fs) {
    const double w0 = 2.0 * kPi * f / fs;
    cosw = std::cos(w0);
    alpha = std::sin(w0) / (2.0 * q);
  }
};

Biquad normalized(double b0, double b1, double b2, double a0, double a1, double a2) {
  return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

void steady_state(const Biquad& s, double x, double& z1, double& z2) {
  const double y = s.dc_gain() * x;
  z2 = s.b2 * x - s.a2 * y;
  z1 = s.b1 * x - s.a1 * y + z2;
}

void filter_inplace(std::span<const Biquad> sections, std::vector<double>& x) {
  if (x.empty()) return;
  double level = x.front();
  for (const auto& s : sections) {
    double z1 = 0.0, z2 = 0.0;
    steady_state(s, level, z1, z2);
    level *= s.dc_gain();
    for (auto& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

}  // namespace

void FilterSpec::validate(double fs) const {
  if (!(fs > 0.0)) throw UsageError("sampling rate must be positive");
  if (order < 2 || order % 2 != 0) throw UsageError("filter order must be a positive even number");
  if (!(lo_hz > 0.0) || !(lo_hz < hi_hz)) throw UsageError("filter band must satisfy 0 < lo < hi");
  if (!(hi_hz < fs / 2.0)) throw UsageError("filter band exceeds Nyquist frequency");
}

Biquad design_lowpass(double f, double q, double fs) {
  const Rbj r(f, q, fs);
  return normalized((1 - r.cosw) / 2, 1 - r.cosw, (1 - r.cosw) / 2, 1 + r.alpha, -2 * r.cosw, 1 - r.alpha);
}

Biquad design_highpass(double f, double q, double fs) {
  const Rbj r(f, q, fs);
  return normalized((1 + r.cosw) / 2, -(1 + r.cosw), (1 + r.cosw) / 2, 1 + r.alpha, -2 * r.cosw, 1 - r.alpha);
}

Biquad design_bandpass(double f, double q, double fs) {
  const Rbj r(f, q, fs);
  return normalized(r.alpha, 0.0, -r.alpha, 1 + r.alpha, -2 * r.cosw, 1 - r.alpha);
}

std::vector<Biquad> design_butterworth_bandpass(const FilterSpec& spec, double fs) {
  spec.validate(fs);
  std::vector<Biquad> sections;
  for (double q : butterworth_q(spec.order)) sections.push_back(design_highpass(spec.lo_hz, q, fs));
  for (double q : butterworth_q(spec.order)) sections.push_back(design_lowpass(spec.hi_hz, q, fs));
  return sections;
}

std::vector<double> sosfilt(std::span<const Biquad> sections, std::span<const double> signal) {
  std::vector<double> y(signal.begin(), signal.end());
  filter_inplace(sections, y);
  return y;
}

std::vector<double> sosfiltfilt(std::span<const Biquad> sections, std::span<const double> signal,
                                std::size_t padlen) {
  const std::size_t n = signal.size();
  if (n == 0) return {};
  padlen = std::min(padlen, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * signal[0] - signal[i]);
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * signal[n - 1] - signal[n - 1 - i]);

  filter_inplace(sections, ext);
  std::reverse(ext.begin(), ext.end());
  filter_inplace(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen),
          ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

std::vector<double> bandpass(std::span<const double> signal, double fs, const FilterSpec& spec) {
  spec.validate(fs);
  if (signal.size() < static_cast<std::size_t>(3 * spec.order)) throw DataError("signal too short to filter");
  const auto sections = design_butterworth_bandpass(spec, fs);
  // Three time constants of the lowest corner.
  const auto padlen = static_cast<std::size_t>(std::ceil(3.0 * fs / spec.lo_hz));
  return sosfiltfilt(sections, signal, padlen);
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

ZScored zscore(std::span<const double> signal) {
  if (signal.size() < 2) throw UsageError("zscore needs at least 2 samples");
  ZScored out;
  out.stats.mu = mean(signal);
  out.stats.sigma = sample_std(signal);
  if (!(out.stats.sigma > 0.0)) throw DataError("zero variance");
  out.values.reserve(signal.size());
  for (double v : signal) out.values.push_back((v - out.stats.mu) / out.stats.sigma);
  return out;
}

void BandSet::validate(double fs) const {
  for (const auto& b : {delta, theta, alpha, beta}) {
    if (!(b.lo >= 0.0) || !(b.lo < b.hi) || !(b.hi <= fs / 2.0)) throw UsageError("invalid EEG band edges");
  }
}

double Spectrum::power(double lo, double hi) const {
  double p = 0.0;
  for (std::size_t k = 0; k < psd.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    if (f >= lo && f < hi) p += psd[k];
  }
  return p * df;
}

Spectrum welch(std::span<const double> signal, double fs) {
  const auto nseg = static_cast<std::size_t>(std::lround(2.0 * fs));
  if (nseg < 4 || signal.size() < nseg) throw DataError("signal too short for band powers");
  const std::size_t step = nseg / 2;

  std::vector<double> taper(nseg);
  double taper_energy = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    taper[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(nseg));
    taper_energy += taper[i] * taper[i];
  }

  const std::size_t nbins = nseg / 2 + 1;
  Spectrum spec;
  spec.df = fs / static_cast<double>(nseg);
  spec.psd.assign(nbins, 0.0);

  auto plan = r2c_plan(static_cast<int>(nseg));
  std::vector<double> seg(nseg);
  std::vector<std::complex<double>> bins(nbins);
  std::size_t count = 0;
  for (std::size_t start = 0; start + nseg <= signal.size(); start += step) {
    const double m = mean(signal.subspan(start, nseg));
    for (std::size_t i = 0; i < nseg; ++i) seg[i] = (signal[start + i] - m) * taper[i];
    fftw_execute_dft_r2c(plan, seg.data(), reinterpret_cast<fftw_complex*>(bins.data()));
    for (std::size_t k = 0; k < nbins; ++k) spec.psd[k] += std::norm(bins[k]);
    ++count;
  }
  const double scale = 1.0 / (fs * taper_energy * static_cast<double>(count));
  for (std::size_t k = 0; k < nbins; ++k) {
    const bool edge = k == 0 || (nseg % 2 == 0 && k == nbins - 1);
    spec.psd[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return spec;
}

BandPowers band_powers(std::span<const double> signal, double fs, const BandSet& bands) {
  bands.validate(fs);
  const auto spec = welch(signal, fs);
  return {spec.power(bands.delta.lo, bands.delta.hi), spec.power(bands.theta.lo, bands.theta.hi),
          spec.power(bands.alpha.lo, bands.alpha.hi), spec.power(bands.beta.lo, bands.beta.hi)};
}

std::vector<double> detect_pulse_peak_positions(std::span<const double> x, double fs, double refractory_ms) {
  if (!(fs > 0.0)) throw UsageError("sampling rate must be positive");
  if (static_cast<double>(x.size()) < 2.0 * fs) throw DataError("signal too short for peak detection");
  const double threshold = mean(x) + 0.5 * sample_std(x);

  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > threshold && x[i] > x[i - 1] && x[i] >= x[i + 1]) candidates.push_back(i);
  }
  // Strongest first; equal heights resolved by position.
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] > x[b] : a < b;
  });
  const double min_gap = refractory_ms * 1e-3 * fs;
  std::vector<std::size_t> accepted;
  for (auto c : candidates) {
    auto it = std::lower_bound(accepted.begin(), accepted.end(), c);
    const bool clear_right = it == accepted.end() || static_cast<double>(*it - c) >= min_gap;
    const bool clear_left = it == accepted.begin() || static_cast<double>(c - *(it - 1)) >= min_gap;
    if (clear_left && clear_right) accepted.insert(it, c);
  }

  std::vector<double> positions;
  positions.reserve(accepted.size());
  for (auto i : accepted) {
    const double y0 = x[i - 1], y1 = x[i], y2 = x[i + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    const double shift = denom < 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
    positions.push_back(static_cast<double>(i) + std::clamp(shift, -0.5, 0.5));
  }
  return positions;
}

std::vector<double> detect_pulse_peaks(std::span<const double> signal, double fs, double refractory_ms) {
  const auto peaks = detect_pulse_peak_positions(signal, fs, refractory_ms);
  if (peaks.size() < 2) throw DataError("insufficient peaks");
  std::vector<double> rr;
  rr.reserve(peaks.size() - 1);
  for (std::size_t i = 1; i < peaks.size(); ++i) rr.push_back((peaks[i] - peaks[i - 1]) * 1000.0 / fs);
  return rr;
}

HRVMetrics hrv_metrics(std::span<const double> rr) {
  if (rr.size() < 2) throw DataError("need at least 2 RR intervals");
  HRVMetrics m;
  m.mean_rr_ms = mean(rr);
  m.sdnn_ms = sample_std(rr);
  double ss = 0.0;
  for (std::size_t i = 1; i < rr.size(); ++i) ss += (rr[i] - rr[i - 1]) * (rr[i] - rr[i - 1]);
  m.rmssd_ms = std::sqrt(ss / static_cast<double>(rr.size() - 1));
  return m;
}

void PhysioConfig::validate(double fs) const {
  filter.validate(fs);
  bands.validate(fs);
  if (!(clip_factor > 0.0)) throw UsageError("clip_factor must be positive");
  if (!(max_clip_fraction >= 0.0 && max_clip_fraction <= 1.0)) {
    throw UsageError("max_clip_fraction must lie in [0, 1]");
  }
  if (!(artifact_history_s > 0.0)) throw UsageError("artifact_history_s must be positive");
  if (!(refractory_ms > 0.0)) throw UsageError("refractory_ms must be positive");
}

std::size_t repair_artifacts(std::vector<double>& x, double fs, const PhysioConfig& cfg) {
  if (x.empty()) return 0;
  const auto history = std::min(x.size(), static_cast<std::size_t>(std::lround(cfg.artifact_history_s * fs)));
  std::vector<double> tail(x.end() - static_cast<std::ptrdiff_t>(history), x.end());
  const auto mid = tail.begin() + static_cast<std::ptrdiff_t>(tail.size() / 2);
  std::nth_element(tail.begin(), mid, tail.end());
  const double median = *mid;
  for (auto& v : tail) v = std::abs(v - median);
  std::nth_element(tail.begin(), mid, tail.end());
  // 1.4826 * MAD estimates the standard deviation of the clean signal.
  const double sigma = 1.4826 * *mid;
  if (!(sigma > 0.0)) return 0;
  const double limit = cfg.clip_factor * sigma;

  std::vector<bool> bad(x.size());
  std::size_t nbad = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    bad[i] = std::abs(x[i] - median) > limit;
    nbad += bad[i];
  }
  if (nbad == 0 || nbad == x.size()) return nbad;

  std::size_t i = 0;
  while (i < x.size()) {
    if (!bad[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < x.size() && bad[j]) ++j;
    const bool has_left = i > 0;
    const bool has_right = j < x.size();
    const double left = has_left ? x[i - 1] : x[j];
    const double right = has_right ? x[j] : x[i - 1];
    const double span = static_cast<double>(j - i + 1);
    for (std::size_t k = i; k < j; ++k) {
      const double frac = static_cast<double>(k - i + 1) / span;
      x[k] = left + (right - left) * frac;
    }
    i = j;
  }
  return nbad;
}

const std::vector<std::string>& PhysioFeatures::names() {
  static const std::vector<std::string> kNames = {
      "eeg_delta", "eeg_theta",  "eeg_alpha", "eeg_beta", "eeg_slowing_ratio",
      "hr_mean_rr", "hr_sdnn",   "hr_rmssd",  "eog_var",  "eog_zcr"};
  return kNames;
}

std::vector<double> PhysioFeatures::values() const {
  return {bands.delta,   bands.theta,  bands.alpha,   bands.beta,   slowing_ratio,
          hrv.mean_rr_ms, hrv.sdnn_ms, hrv.rmssd_ms, eog_variance, eog_zero_crossing_rate};
}

PhysioFeatures physio_features(const Window& window, const PhysioConfig& cfg) {
  std::size_t total = 0;
  std::size_t clipped_total = 0;
  std::map<Channel, std::vector<double>> filtered;
  std::map<Channel, double> rates;
  for (Channel ch : kAllChannels) {
    auto it = window.physio.find(ch);
    if (it == window.physio.end() || it->second.empty()) {
      throw DataError("channel absent: " + std::string(to_string(ch)));
    }
    const double fs = window.fs.at(ch);
    cfg.validate(fs);
    auto x = it->second;
    const auto clipped = repair_artifacts(x, fs, cfg);
    if (static_cast<double>(clipped) > cfg.max_clip_fraction * static_cast<double>(x.size())) {
      throw ArtifactRejected("window discarded: " + std::string(to_string(ch)) + " has " +
                             std::to_string(clipped) + " of " + std::to_string(x.size()) +
                             " samples clipped");
    }
    total += x.size();
    clipped_total += clipped;
    filtered[ch] = bandpass(x, fs, cfg.filter);
    rates[ch] = fs;
  }

  PhysioFeatures out;
  out.quality = 1.0 - static_cast<double>(clipped_total) / static_cast<double>(total);

  const auto eeg = zscore(filtered[Channel::EEG]);
  out.bands = band_powers(eeg.values, rates[Channel::EEG], cfg.bands);
  out.slowing_ratio = out.bands.slowing_ratio();

  out.hrv = hrv_metrics(detect_pulse_peaks(filtered[Channel::PULSE], rates[Channel::PULSE], cfg.refractory_ms));

  // Variance is taken before normalization; after it the value is always 1.
  const auto& eog_raw = filtered[Channel::EOG];
  out.eog_variance = sample_std(eog_raw) * sample_std(eog_raw);
  const auto eog = zscore(eog_raw);
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < eog.values.size(); ++i) {
    crossings += (eog.values[i - 1] < 0.0) != (eog.values[i] < 0.0);
  }
  const double seconds = static_cast<double>(eog.values.size()) / rates[Channel::EOG];
  out.eog_zero_crossing_rate = static_cast<double>(crossings) / seconds;
  return out;
}

}  // namespace fusewake::physio
