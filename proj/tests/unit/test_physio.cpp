#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fusewake/error.hpp"
#include "fusewake/physio.hpp"
#include "helpers.hpp"

using namespace fusewake;
using namespace fusewake::physio;

namespace {

// Amplitude of the `hz` component over x[lo, lo+n) by direct DFT evaluation.
double dft_amplitude(const std::vector<double>& x, std::size_t lo, std::size_t n, double hz, double fs) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = 2.0 * std::numbers::pi * hz * static_cast<double>(lo + i) / fs;
    re += x[lo + i] * std::cos(ph);
    im += x[lo + i] * std::sin(ph);
  }
  return 2.0 * std::hypot(re, im) / static_cast<double>(n);
}

std::vector<double> pulse_train(double seconds, double fs, const std::vector<double>& beats, double sigma_s = 0.04) {
  std::vector<double> x(static_cast<std::size_t>(seconds * fs), 0.0);
  for (double b : beats) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(i) / fs - b;
      x[i] += std::exp(-0.5 * d * d / (sigma_s * sigma_s));
    }
  }
  return x;
}

// Evenly spaced beats riding on a slow wave, shaped like the generator's pulse.
std::vector<double> ppg(double seconds, double fs, double rr_s) {
  std::vector<double> beats;
  for (double t = 0.4; t < seconds; t += rr_s) beats.push_back(t);
  auto x = pulse_train(seconds, fs, beats, 0.025);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] += 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) / fs - 0.4) / rr_s);
  }
  return x;
}

Window make_window(const Session& s) {
  auto w = window_session(s, s.duration_s(), s.duration_s());
  return w.at(0);
}

}  // namespace

TEST_SUITE("physio") {
  TEST_CASE("zero signal stays zero") {
    const std::vector<double> z(2560, 0.0);
    for (double v : bandpass(z, 256.0, FilterSpec{})) CHECK(v == 0.0);
  }

  TEST_CASE("10 Hz passes and 60 Hz is attenuated") {
    const double fs = 256.0;
    const auto x10 = fwtest::sine(5120, fs, 10.0);
    const auto y10 = bandpass(x10, fs, FilterSpec{});
    CHECK(dft_amplitude(y10, 1280, 2560, 10.0, fs) >= 0.95);
    const auto x60 = fwtest::sine(5120, fs, 60.0);
    const auto y60 = bandpass(x60, fs, FilterSpec{});
    CHECK(dft_amplitude(y60, 1280, 2560, 60.0, fs) <= 0.1);
  }

  TEST_CASE("output length matches input") {
    fusewake::Rng rng(3);
    const auto x = fwtest::white(777, rng);
    CHECK(bandpass(x, 256.0, FilterSpec{}).size() == 777);
  }

  TEST_CASE("filter errors") {
    const std::vector<double> shortx(11, 1.0);
    CHECK_THROWS_AS(bandpass(shortx, 256.0, FilterSpec{}), DataError);
    FilterSpec beyond;
    beyond.hi_hz = 200.0;
    const std::vector<double> x(1000, 1.0);
    CHECK_THROWS_AS(bandpass(x, 256.0, beyond), UsageError);
    FilterSpec inverted{40.0, 0.5, 4};
    CHECK_THROWS_AS(bandpass(x, 256.0, inverted), UsageError);
  }

  TEST_CASE("butterworth sections have unit passband gain") {
    const auto lp = design_lowpass(40.0, std::numbers::sqrt2 / 2.0, 256.0);
    CHECK(lp.dc_gain() == doctest::Approx(1.0).epsilon(1e-12));
    const auto hp = design_highpass(0.5, std::numbers::sqrt2 / 2.0, 256.0);
    CHECK(std::abs(hp.dc_gain()) < 1e-9);
    CHECK(design_butterworth_bandpass(FilterSpec{}, 256.0).size() == 4);
  }

  TEST_CASE("zscore of 1 2 3") {
    const std::vector<double> x = {1, 2, 3};
    const auto z = zscore(x);
    CHECK(z.values[0] == -1.0);
    CHECK(z.values[1] == 0.0);
    CHECK(z.values[2] == 1.0);
    CHECK(z.stats.mu == 2.0);
    CHECK(z.stats.sigma == 1.0);
  }

  TEST_CASE("zscore of a constant signal") {
    const std::vector<double> x = {5, 5, 5};
    try {
      zscore(x);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()) == "zero variance");
    }
    const std::vector<double> one = {1.0};
    CHECK_THROWS_AS(zscore(one), UsageError);
  }

  TEST_CASE("zscore output moments by independent recomputation") {
    fusewake::Rng rng(11);
    auto x = fwtest::white(1000, rng, 3.0);
    for (auto& v : x) v += 7.0;
    const auto z = zscore(x).values;
    long double m = 0.0L;
    for (double v : z) m += v;
    m /= z.size();
    long double ss = 0.0L;
    for (double v : z) ss += (v - m) * (v - m);
    const double sd = std::sqrt(static_cast<double>(ss / (z.size() - 1)));
    CHECK(std::abs(static_cast<double>(m)) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }

  TEST_CASE("band powers of zero signal") {
    const std::vector<double> z(2048, 0.0);
    const auto b = band_powers(z, 256.0);
    CHECK(b.delta == 0.0);
    CHECK(b.theta == 0.0);
    CHECK(b.alpha == 0.0);
    CHECK(b.beta == 0.0);
  }

  TEST_CASE("10 Hz sinusoid lands in alpha") {
    const auto x = fwtest::sine(2560, 256.0, 10.0);
    const auto b = band_powers(x, 256.0);
    CHECK(b.alpha >= 0.9 * b.total());
    // Density integrates to the sinusoid's power of 1/2.
    CHECK(b.total() == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("white noise power is proportional to bandwidth") {
    const BandSet bands;
    const double widths[4] = {bands.delta.hi - bands.delta.lo, bands.theta.hi - bands.theta.lo,
                              bands.alpha.hi - bands.alpha.lo, bands.beta.hi - bands.beta.lo};
    const double total_width = widths[0] + widths[1] + widths[2] + widths[3];
    double share[4] = {0, 0, 0, 0};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      fusewake::Rng rng(seed);
      const auto x = fwtest::white(256 * 60, rng);
      const auto b = band_powers(x, 256.0);
      const double p[4] = {b.delta, b.theta, b.alpha, b.beta};
      for (int k = 0; k < 4; ++k) share[k] += p[k] / b.total() / 50.0;
    }
    for (int k = 0; k < 4; ++k) CHECK(share[k] == doctest::Approx(widths[k] / total_width).epsilon(0.15));
  }

  TEST_CASE("band powers need two seconds") {
    const std::vector<double> x(300, 1.0);
    CHECK_THROWS_AS(band_powers(x, 256.0), DataError);
  }

  TEST_CASE("60 bpm pulse train") {
    std::vector<double> beats;
    for (int k = 0; k < 20; ++k) beats.push_back(0.5 + k);
    const auto x = pulse_train(21.0, 256.0, beats);
    const auto rr = detect_pulse_peaks(x, 256.0);
    REQUIRE(rr.size() == 19);
    for (double v : rr) CHECK(std::abs(v - 1000.0) <= 1000.0 / 256.0);
  }

  TEST_CASE("refractory period keeps the stronger of two close peaks") {
    auto x = pulse_train(10.0, 256.0, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0});
    const auto extra = pulse_train(10.0, 256.0, {5.2}, 0.02);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.7 * extra[i];
    const auto peaks = detect_pulse_peak_positions(x, 256.0, 300.0);
    CHECK(peaks.size() == 9);
  }

  TEST_CASE("flat signal has insufficient peaks") {
    const std::vector<double> x(2560, 1.0);
    try {
      detect_pulse_peaks(x, 256.0);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()) == "insufficient peaks");
    }
  }

  TEST_CASE("hrv metrics") {
    const std::vector<double> flat(10, 1000.0);
    const auto h = hrv_metrics(flat);
    CHECK(h.mean_rr_ms == 1000.0);
    CHECK(h.sdnn_ms == 0.0);
    CHECK(h.rmssd_ms == 0.0);
    const std::vector<double> alt = {800, 1200, 800, 1200};
    CHECK(hrv_metrics(alt).rmssd_ms == doctest::Approx(400.0).epsilon(1e-15));
    const std::vector<double> one = {900.0};
    CHECK_THROWS_AS(hrv_metrics(one), DataError);
  }

  TEST_CASE("hrv metrics match brute force") {
    fusewake::Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> rr(2 + rng.below(50));
      for (auto& v : rr) v = rng.uniform(500.0, 1300.0);
      long double sum = 0, ss = 0, sd = 0;
      for (double v : rr) sum += v;
      const long double m = sum / rr.size();
      for (double v : rr) ss += (v - m) * (v - m);
      for (std::size_t i = 1; i < rr.size(); ++i) sd += (rr[i] - rr[i - 1]) * (rr[i] - rr[i - 1]);
      const auto h = hrv_metrics(rr);
      CHECK(h.mean_rr_ms == doctest::Approx(static_cast<double>(m)).epsilon(1e-9));
      CHECK(h.sdnn_ms == doctest::Approx(std::sqrt(static_cast<double>(ss / (rr.size() - 1)))).epsilon(1e-9));
      CHECK(h.rmssd_ms == doctest::Approx(std::sqrt(static_cast<double>(sd / (rr.size() - 1)))).epsilon(1e-9));
    }
  }

  TEST_CASE("artifact repair interpolates isolated spikes") {
    fusewake::Rng rng(2);
    auto x = fwtest::white(2560, rng);
    const double before = x[99], after = x[102];
    x[100] = 80.0;
    x[101] = -90.0;
    const auto n = repair_artifacts(x, 256.0, PhysioConfig{});
    CHECK(n == 2);
    CHECK(x[100] == doctest::Approx(before + (after - before) / 3.0));
    CHECK(x[101] == doctest::Approx(before + 2.0 * (after - before) / 3.0));
  }

  TEST_CASE("clean window has quality 1") {
    auto s = fwtest::make_session(60.0);
    s.physio[Channel::PULSE][0].samples = ppg(60.0, 256.0, 0.85);
    const auto f = physio_features(make_window(s), PhysioConfig{});
    CHECK(f.quality == 1.0);
    CHECK(f.hrv.mean_rr_ms == doctest::Approx(850.0).epsilon(0.01));
    CHECK(f.eog_variance > 0.0);
    CHECK(f.slowing_ratio == doctest::Approx((f.bands.theta + f.bands.alpha) / f.bands.beta));
  }

  TEST_CASE("30 percent clipped EEG discards the window") {
    auto s = fwtest::make_session(60.0);
    s.physio[Channel::PULSE][0].samples = ppg(60.0, 256.0, 0.85);
    auto& eeg = s.physio[Channel::EEG][0].samples;
    for (std::size_t i = 0; i < eeg.size(); ++i) {
      if (i % 10 < 3) eeg[i] = (i % 2 ? 50.0 : -50.0);
    }
    CHECK_THROWS_AS(physio_features(make_window(s), PhysioConfig{}), ArtifactRejected);
    // A 5% spike rate is repaired and lowers quality.
    for (std::size_t i = 0; i < eeg.size(); ++i) {
      if (i % 10 < 3) eeg[i] = 0.0;
      if (i % 20 == 0) eeg[i] = 50.0;
    }
    const auto f = physio_features(make_window(s), PhysioConfig{});
    CHECK(f.quality < 1.0);
    CHECK(f.quality > 0.95);
  }

  TEST_CASE("missing channel is a data error, not an artifact") {
    auto s = fwtest::make_session(60.0);
    auto w = make_window(s);
    w.physio.erase(Channel::EOG);
    try {
      physio_features(w, PhysioConfig{});
      FAIL("expected DataError");
    } catch (const ArtifactRejected&) {
      FAIL("wrong error kind");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("EOG") != std::string::npos);
    }
  }
}
