#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "doctest.h"
#include "fusewake/eval.hpp"
#include "fusewake/fusion.hpp"
#include "fusewake/model.hpp"
#include "fusewake/physio.hpp"
#include "fusewake/rng.hpp"
#include "fusewake/vision.hpp"
#include "helpers.hpp"

using namespace fusewake;

namespace {

constexpr int kCases = 1000;

// Runs `body` on kCases generators derived from `seed`; stops at the first
// failing case and reports its index.
void for_all(std::uint64_t seed, const std::function<bool(Rng&)>& body) {
  Rng root(seed);
  for (int i = 0; i < kCases; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    const bool ok = body(rng);
    if (!ok) {
      FAIL_CHECK("property failed at case " << i);
      return;
    }
  }
}

EyeLandmarks random_eye(Rng& rng) {
  EyeLandmarks e;
  for (auto& p : e) p = {rng.uniform(-50, 50), rng.uniform(-50, 50)};
  // Keep the horizontal span well away from zero.
  e[3] = {e[0].x + rng.uniform(10, 40), e[0].y + rng.uniform(-5, 5)};
  return e;
}

double entropy_bits(std::span<const int> v) {
  std::map<int, double> count;
  for (int x : v) count[x] += 1.0;
  double h = 0.0;
  for (const auto& [k, c] : count) {
    const double p = c / static_cast<double>(v.size());
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<double> noise(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("ear is invariant under similarity transforms") {
    for_all(1, [](Rng& rng) {
      const auto e = random_eye(rng);
      const double th = rng.uniform(0, 2 * M_PI), s = rng.uniform(0.1, 10), tx = rng.uniform(-100, 100),
                   ty = rng.uniform(-100, 100);
      EyeLandmarks t;
      for (std::size_t i = 0; i < 6; ++i) {
        t[i] = {s * (std::cos(th) * e[i].x - std::sin(th) * e[i].y) + tx,
                s * (std::sin(th) * e[i].x + std::cos(th) * e[i].y) + ty};
      }
      const double a = vision::ear(e), b = vision::ear(t);
      return std::abs(a - b) <= 1e-9 * std::max(1.0, a);
    });
  }

  TEST_CASE("auc is invariant under monotone transforms") {
    for_all(2, [](Rng& rng) {
      const std::size_t n = 10 + rng.below(60);
      std::vector<double> s(n), t(n);
      std::vector<State> l(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = std::round(rng.uniform(-3, 3) * 4.0) / 4.0;
        l[i] = i == 0 ? State::Drowsy : i == 1 ? State::Alert : (rng.bernoulli(0.5) ? State::Drowsy : State::Alert);
      }
      const int kind = static_cast<int>(rng.below(3));
      for (std::size_t i = 0; i < n; ++i) {
        t[i] = kind == 0 ? std::exp(s[i]) : kind == 1 ? 3.0 * s[i] + 7.0 : std::atan(s[i]) + s[i] * s[i] * s[i];
      }
      return std::abs(eval::roc_auc(s, l).auc - eval::roc_auc(t, l).auc) <= 1e-12;
    });
  }

  TEST_CASE("mutual information is bounded by the entropies") {
    for_all(3, [](Rng& rng) {
      const std::size_t n = 20 + rng.below(200);
      std::vector<double> x(n);
      std::vector<int> y(n);
      const double link = rng.uniform();
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(rng.below(2));
        x[i] = link * y[i] + rng.normal();
      }
      const auto bins = fusion::equal_frequency_bins(x, 2 + static_cast<int>(rng.below(12)));
      const double mi = fusion::mutual_information_bits(bins, y);
      return mi >= 0.0 && mi <= std::min(entropy_bits(bins), entropy_bits(y)) + 1e-9;
    });
  }

  TEST_CASE("fused score is a convex combination") {
    for_all(4, [](Rng& rng) {
      const double sv = rng.uniform(), sp = rng.uniform();
      const auto w = fusion::fusion_weights(rng.uniform(0.01, 1), rng.uniform(0.01, 1));
      const double f = fusion::fuse_scores(w, {sv, 1.0}, {sp, 1.0});
      return f >= std::min(sv, sp) && f <= std::max(sv, sp) && std::abs(w.w_v + w.w_p - 1.0) < 1e-12;
    });
  }

  TEST_CASE("fused score is monotone in each input") {
    for_all(5, [](Rng& rng) {
      const auto w = fusion::fusion_weights(rng.uniform(), rng.uniform(0.01, 1));
      const double sv = rng.uniform(), sp = rng.uniform(), d = rng.uniform(0, 1 - std::max(sv, sp));
      const double f = fusion::fuse_scores(w, {sv, 1}, {sp, 1});
      return fusion::fuse_scores(w, {sv + d, 1}, {sp, 1}) >= f && fusion::fuse_scores(w, {sv, 1}, {sp + d, 1}) >= f;
    });
  }

  TEST_CASE("fusion weights ignore a common quality scale") {
    for_all(6, [](Rng& rng) {
      const double qv = rng.uniform(0.01, 1), qp = rng.uniform(0.01, 1), c = rng.uniform(0.01, 1);
      const auto a = fusion::fusion_weights(qv, qp), b = fusion::fusion_weights(c * qv, c * qp);
      return std::abs(a.w_v - b.w_v) < 1e-12 && std::abs(a.w_p - b.w_p) < 1e-12;
    });
  }

  TEST_CASE("splits are subject disjoint") {
    for_all(7, [](Rng& rng) {
      const std::size_t subjects = 3 + rng.below(40);
      const std::size_t sessions = subjects + rng.below(3 * subjects);
      std::vector<std::string> ids(sessions);
      for (std::size_t i = 0; i < sessions; ++i) ids[i] = "P" + std::to_string(i < subjects ? i : rng.below(subjects));
      const auto s = eval::split_dataset(ids, eval::SplitRatios{}, rng.next_u64());
      std::map<std::string, std::set<int>> where;
      std::size_t total = 0;
      for (int part = 0; part < 3; ++part) {
        const auto& idx = part == 0 ? s.train : part == 1 ? s.val : s.test;
        if (idx.empty()) return false;
        for (auto i : idx) where[ids[i]].insert(part);
        total += idx.size();
      }
      if (total != sessions) return false;
      return std::all_of(where.begin(), where.end(), [](const auto& kv) { return kv.second.size() == 1; });
    });
  }

  TEST_CASE("zscore ignores affine rescaling") {
    for_all(8, [](Rng& rng) {
      const auto x = noise(rng, 2 + rng.below(100));
      const double a = rng.uniform(0.01, 100), b = rng.uniform(-100, 100);
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
      const auto zx = physio::zscore(x).values, zy = physio::zscore(y).values;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(zx[i] - zy[i]) > 1e-8) return false;
      }
      return true;
    });
  }

  TEST_CASE("bandpass is linear") {
    const physio::FilterSpec spec;
    for_all(9, [&](Rng& rng) {
      const auto x = noise(rng, 600), y = noise(rng, 600);
      const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
      std::vector<double> z(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + b * y[i];
      const auto fx = physio::bandpass(x, 256.0, spec), fy = physio::bandpass(y, 256.0, spec),
                 fz = physio::bandpass(z, 256.0, spec);
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (std::abs(fz[i] - (a * fx[i] + b * fy[i])) > 1e-9) return false;
      }
      return true;
    });
  }

  TEST_CASE("bandpass has zero phase") {
    const physio::FilterSpec spec;
    for_all(10, [&](Rng& rng) {
      // Whole cycles over the 512-sample interior so the correlation is exact.
      const double hz = 0.5 * static_cast<double>(4 + rng.below(57));
      const auto x = fwtest::sine(1024, 256.0, hz, 1.0, rng.uniform(0, 2 * M_PI));
      const auto y = physio::bandpass(x, 256.0, spec);
      // Cross-correlation over the interior peaks at lag 0.
      int best_lag = 0;
      double best = -1e300;
      for (int lag = -8; lag <= 8; ++lag) {
        double c = 0.0;
        for (std::size_t i = 256; i < 768; ++i) c += x[i] * y[static_cast<std::size_t>(static_cast<int>(i) + lag)];
        if (c > best) {
          best = c;
          best_lag = lag;
        }
      }
      return best_lag == 0;
    });
  }

  TEST_CASE("band powers never exceed the 0.5 to 40 Hz power") {
    for_all(11, [](Rng& rng) {
      auto x = noise(rng, 1024);
      const double hz = rng.uniform(0.5, 45.0);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += rng.uniform(0, 3) * std::sin(2 * M_PI * hz * i / 256.0);
      const auto bp = physio::band_powers(x, 256.0);
      const double limit = physio::welch(x, 256.0).power(0.5, 40.0);
      return bp.total() <= limit * (1.0 + 1e-12) && bp.delta >= 0 && bp.beta >= 0;
    });
  }

  TEST_CASE("pca components are orthonormal with sorted ratios") {
    for_all(12, [](Rng& rng) {
      const std::size_t d = 2 + rng.below(5), n = d + 5 + rng.below(40);
      std::vector<std::vector<double>> rows(n, std::vector<double>(d));
      for (auto& r : rows) {
        for (std::size_t j = 0; j < d; ++j) r[j] = rng.normal() * (1.0 + j) + (j ? 0.5 * r[0] : 0.0);
      }
      const auto m = fusion::fit_pca(rows, 1.0);
      for (std::size_t a = 0; a < m.components.size(); ++a) {
        for (std::size_t b = 0; b < m.components.size(); ++b) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += m.components[a][j] * m.components[b][j];
          if (std::abs(dot - (a == b ? 1.0 : 0.0)) > 1e-9) return false;
        }
      }
      for (std::size_t k = 1; k < m.explained_variance_ratios.size(); ++k) {
        if (m.explained_variance_ratios[k] > m.explained_variance_ratios[k - 1] + 1e-15) return false;
      }
      return true;
    });
  }

  TEST_CASE("ema stays within the range of its inputs") {
    for_all(13, [](Rng& rng) {
      std::vector<double> s(1 + rng.below(50));
      for (auto& v : s) v = rng.uniform();
      const auto e = model::ema(s, rng.uniform(0.01, 1.0));
      const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
      return std::all_of(e.begin(), e.end(), [&](double v) { return v >= *lo - 1e-15 && v <= *hi + 1e-15; });
    });
  }

  TEST_CASE("blink count falls as the minimum run grows") {
    for_all(14, [](Rng& rng) {
      std::vector<double> s(30 + rng.below(300));
      for (auto& v : s) v = rng.bernoulli(0.3) ? 0.1 : 0.3;
      std::size_t prev = SIZE_MAX;
      for (int m = 1; m <= 6; ++m) {
        const auto c = vision::detect_blinks(s, 30.0, 0.2, m).size();
        if (c > prev) return false;
        prev = c;
      }
      return true;
    });
  }

  TEST_CASE("perclos rises with the threshold") {
    for_all(15, [](Rng& rng) {
      std::vector<double> s(1 + rng.below(200));
      for (auto& v : s) v = rng.uniform(0.0, 0.5);
      double prev = -1.0;
      for (double th = 0.05; th <= 0.5; th += 0.05) {
        const double p = vision::perclos(s, th);
        if (p < prev) return false;
        prev = p;
      }
      return true;
    });
  }
}
