#include "fusewake/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fusewake/error.hpp"
#include "fusewake/rng.hpp"

namespace fusewake::eval {

DatasetSplit split_dataset(std::span<const std::string> subject_ids, const SplitRatios& r, std::uint64_t seed) {
  if (!(r.train > 0.0 && r.val > 0.0 && r.test > 0.0)) throw UsageError("split ratios must be positive");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");

  // Subjects in first-appearance order, then shuffled.
  std::vector<std::string> subjects;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    auto [it, inserted] = members.try_emplace(subject_ids[i]);
    if (inserted) subjects.push_back(subject_ids[i]);
    it->second.push_back(i);
  }
  if (subjects.size() < 3) throw DataError("split needs at least 3 subjects");
  std::sort(subjects.begin(), subjects.end());
  Rng rng(seed);
  for (std::size_t i = subjects.size() - 1; i > 0; --i) {
    std::swap(subjects[i], subjects[rng.below(i + 1)]);
  }

  // Each subject lands in the split containing the midpoint of its session
  // block along the cumulative session count.
  const double n = static_cast<double>(subject_ids.size());
  const double b1 = r.train * n;
  const double b2 = (r.train + r.val) * n;
  std::array<std::vector<std::size_t>, 3> parts;  // subject positions per split
  double cum = 0.0;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const double size = static_cast<double>(members[subjects[s]].size());
    const double mid = cum + size / 2.0;
    parts[mid < b1 ? 0 : mid < b2 ? 1 : 2].push_back(s);
    cum += size;
  }
  // Every split gets at least one subject, taken from the largest split.
  for (auto& part : parts) {
    if (!part.empty()) continue;
    auto donor = std::max_element(parts.begin(), parts.end(),
                                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
    part.push_back(donor->back());
    donor->pop_back();
  }

  DatasetSplit out;
  std::array<std::vector<std::size_t>*, 3> dst = {&out.train, &out.val, &out.test};
  for (std::size_t p = 0; p < 3; ++p) {
    for (auto s : parts[p]) {
      const auto& idx = members[subjects[s]];
      dst[p]->insert(dst[p]->end(), idx.begin(), idx.end());
    }
    std::sort(dst[p]->begin(), dst[p]->end());
  }
  return out;
}

DatasetSplit split_dataset(std::span<const Session> sessions, const SplitRatios& ratios, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(sessions.size());
  for (const auto& s : sessions) ids.push_back(s.subject_id);
  return split_dataset(ids, ratios, seed);
}

ConfusionMatrix confusion(std::span<const State> predictions, std::span<const State> labels) {
  if (predictions.size() != labels.size()) throw UsageError("length mismatch");
  if (predictions.empty()) throw UsageError("confusion needs at least one prediction");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == State::Drowsy;
    const bool truth = labels[i] == State::Drowsy;
    if (pred && truth) ++cm.tp;
    else if (pred) ++cm.fp;
    else if (truth) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

std::optional<double> f1_score(std::optional<double> p, std::optional<double> r) {
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.tn < 0 || cm.fn < 0) throw UsageError("negative confusion count");
  if (cm.total() == 0) throw UsageError("empty confusion matrix");
  MetricsReport m;
  m.confusion = cm;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const State> labels) {
  if (scores.size() != labels.size()) throw UsageError("length mismatch");
  const auto pos = std::count(labels.begin(), labels.end(), State::Drowsy);
  const auto neg = static_cast<std::ptrdiff_t>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw DataError("single-class labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (labels[order[i]] == State::Drowsy ? tp : fp) += 1;
      ++i;
    }
    RocPoint p{static_cast<double>(fp) / static_cast<double>(neg),
               static_cast<double>(tp) / static_cast<double>(pos), thr};
    const auto& prev = curve.points.back();
    curve.auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    curve.points.push_back(p);
  }
  return curve;
}

LatencyStats latency_stats(std::span<const double> per_frame_ms) {
  if (per_frame_ms.empty()) throw UsageError("no latency samples");
  std::vector<double> sorted(per_frame_ms.begin(), per_frame_ms.end());
  std::sort(sorted.begin(), sorted.end());
  LatencyStats s;
  s.frames = sorted.size();
  s.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  s.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  s.max_ms = sorted.back();
  return s;
}

}  // namespace fusewake::eval
