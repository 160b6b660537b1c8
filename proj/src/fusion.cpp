#include "fusewake/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "fusewake/error.hpp"

namespace fusewake::fusion {

FeatureVector to_feature_vector(const vision::VisionFeatures& fv) {
  return {vision::VisionFeatures::names(), fv.values()};
}

FeatureVector to_feature_vector(const physio::PhysioFeatures& fp) {
  return {physio::PhysioFeatures::names(), fp.values()};
}

FeatureVector concat_features(const FeatureVector& vision, const FeatureVector& physio) {
  if (vision.values.empty() || physio.values.empty()) throw DataError("missing modality");
  if (vision.names.size() != vision.values.size() || physio.names.size() != physio.values.size()) {
    throw UsageError("feature names and values differ in length");
  }
  FeatureVector out;
  out.names.reserve(vision.size() + physio.size());
  out.values.reserve(vision.size() + physio.size());
  for (std::size_t i = 0; i < vision.size(); ++i) {
    out.names.push_back("v." + vision.names[i]);
    out.values.push_back(vision.values[i]);
  }
  for (std::size_t i = 0; i < physio.size(); ++i) {
    out.names.push_back("p." + physio.names[i]);
    out.values.push_back(physio.values[i]);
  }
  return out;
}

FeatureVector concat_features(const vision::VisionFeatures& fv, const physio::PhysioFeatures& fp) {
  if (fv.missing) throw DataError("missing modality");
  return concat_features(to_feature_vector(fv), to_feature_vector(fp));
}

std::vector<double> FeatureMatrix::column(std::size_t j) const {
  std::vector<double> c;
  c.reserve(rows.size());
  for (const auto& r : rows) c.push_back(r[j]);
  return c;
}

std::size_t FeatureMatrix::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw UsageError("unknown feature column \"" + name + "\"");
  return static_cast<std::size_t>(it - columns.begin());
}

void FeatureMatrix::add_row(std::vector<double> values, int label, std::string group) {
  if (values.size() != columns.size()) throw UsageError("row width does not match column count");
  rows.push_back(std::move(values));
  labels.push_back(label);
  groups.push_back(std::move(group));
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(column_index(n));
  FeatureMatrix out;
  out.columns.assign(names.begin(), names.end());
  out.labels = labels;
  out.groups = groups;
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> v;
    v.reserve(idx.size());
    for (auto j : idx) v.push_back(r[j]);
    out.rows.push_back(std::move(v));
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
  FeatureMatrix out;
  out.columns = columns;
  for (auto i : idx) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
    out.groups.push_back(groups.at(i));
  }
  return out;
}

void FeatureMatrix::validate() const {
  std::vector<std::string> sorted = columns;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw UsageError("feature column names must be unique");
  }
  if (labels.size() != rows.size() || groups.size() != rows.size()) {
    throw UsageError("labels and groups must have one entry per row");
  }
  for (const auto& r : rows) {
    if (r.size() != columns.size()) throw UsageError("ragged feature matrix");
    for (double v : r) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
  }
}

ScalerStats fit_scaler(const FeatureMatrix& m) {
  if (m.n_rows() < 2) throw DataError("scaler needs at least 2 rows");
  ScalerStats s;
  for (std::size_t j = 0; j < m.n_cols(); ++j) {
    const auto c = m.column(j);
    const double mu = physio::mean(c);
    const double sigma = physio::sample_std(c);
    if (!(sigma > 0.0)) {
      s.dropped.push_back(m.columns[j]);
      continue;
    }
    s.columns.push_back(m.columns[j]);
    s.mu.push_back(mu);
    s.sigma.push_back(sigma);
  }
  return s;
}

FeatureMatrix ScalerStats::apply(const FeatureMatrix& m) const {
  auto out = m.select_columns(columns);
  for (auto& r : out.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mu[j]) / sigma[j];
  }
  return out;
}

std::vector<double> ScalerStats::apply(std::span<const double> v, std::span<const std::string> input_columns) const {
  if (v.size() != input_columns.size()) throw UsageError("dimension mismatch");
  std::vector<double> out;
  out.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    auto it = std::find(input_columns.begin(), input_columns.end(), columns[j]);
    if (it == input_columns.end()) throw UsageError("input lacks feature column \"" + columns[j] + "\"");
    out.push_back((v[static_cast<std::size_t>(it - input_columns.begin())] - mu[j]) / sigma[j]);
  }
  return out;
}

std::vector<int> equal_frequency_bins(std::span<const double> values, int bins) {
  if (bins < 2) throw UsageError("bins must be at least 2");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && values[order[r]] == values[order[r - 1]]) {
      out[order[r]] = out[order[r - 1]];
    } else {
      out[order[r]] = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
    }
  }
  return out;
}

double mutual_information_bits(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size() || x.empty()) throw UsageError("MI inputs must be non-empty and equal length");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> px, py;
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[{x[i], y[i]}] += 1.0;
    px[x[i]] += 1.0;
    py[y[i]] += 1.0;
  }
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += (c / n) * std::log2(c * n / (px[key.first] * py[key.second]));
  }
  return std::max(0.0, mi);
}

std::vector<MiScore> rank_features_mi(const FeatureMatrix& m, int bins) {
  if (bins < 2) throw UsageError("bins must be at least 2");
  const bool has_pos = std::find(m.labels.begin(), m.labels.end(), 1) != m.labels.end();
  const bool has_neg = std::find(m.labels.begin(), m.labels.end(), 0) != m.labels.end();
  if (!has_pos || !has_neg) throw DataError("single-class labels");
  std::vector<MiScore> scores;
  for (std::size_t j = 0; j < m.n_cols(); ++j) {
    const auto c = m.column(j);
    scores.push_back({m.columns[j], mutual_information_bits(equal_frequency_bins(c, bins), m.labels)});
  }
  std::sort(scores.begin(), scores.end(), [](const MiScore& a, const MiScore& b) {
    return a.mi_bits != b.mi_bits ? a.mi_bits > b.mi_bits : a.column < b.column;
  });
  return scores;
}

std::vector<std::string> rfe(const FeatureMatrix& m, std::size_t k, const LinearTrainer& trainer) {
  if (k < 1 || k > m.n_cols()) throw UsageError("k out of range");
  std::vector<std::string> current = m.columns;
  while (current.size() > k) {
    const auto sub = m.select_columns(current);
    const auto scaler = fit_scaler(sub);
    std::vector<double> importance(current.size(), 0.0);
    if (!scaler.columns.empty()) {
      const auto weights = trainer(scaler.apply(sub));
      if (weights.size() != scaler.columns.size()) throw UsageError("trainer returned wrong weight count");
      for (std::size_t j = 0; j < scaler.columns.size(); ++j) {
        importance[sub.column_index(scaler.columns[j])] = std::abs(weights[j]);
      }
    }
    // Smallest |weight| goes; among equals the later column.
    std::size_t drop = 0;
    for (std::size_t j = 1; j < importance.size(); ++j) {
      if (importance[j] <= importance[drop]) drop = j;
    }
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return current;
}

std::vector<std::string> select_features(const FeatureMatrix& standardized, std::size_t k, int bins,
                                         const LinearTrainer& trainer) {
  if (k < 1) throw UsageError("k out of range");
  k = std::min(k, standardized.n_cols());
  std::vector<std::string> candidates = standardized.columns;
  if (2 * k < candidates.size()) {
    const auto ranked = rank_features_mi(standardized, bins);
    std::vector<std::string> keep;
    for (std::size_t i = 0; i < 2 * k; ++i) keep.push_back(ranked[i].column);
    // Restore the original column order.
    std::vector<std::string> ordered;
    for (const auto& c : standardized.columns) {
      if (std::find(keep.begin(), keep.end(), c) != keep.end()) ordered.push_back(c);
    }
    candidates = std::move(ordered);
  }
  return rfe(standardized.select_columns(candidates), k, trainer);
}

EigenDecomposition symmetric_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (const auto& r : a) {
    if (r.size() != n) throw UsageError("matrix must be square");
  }
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  double scale = 0.0;
  for (const auto& r : a) {
    for (double x : r) scale += x * x;
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off <= 1e-32 * scale || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a[i][i] > a[j][j]; });
  EigenDecomposition out;
  for (auto i : order) {
    out.values.push_back(a[i][i]);
    std::vector<double> vec(n);
    std::size_t big = 0;
    for (std::size_t k = 0; k < n; ++k) {
      vec[k] = v[k][i];
      if (std::abs(vec[k]) > std::abs(vec[big])) big = k;
    }
    if (vec[big] < 0.0) {
      for (auto& x : vec) x = -x;
    }
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

std::vector<std::vector<double>> sample_covariance(const std::vector<std::vector<double>>& rows,
                                                   std::vector<double>& mean_out) {
  const std::size_t n = rows.size();
  if (n < 2) throw DataError("need at least 2 rows");
  const std::size_t d = rows.front().size();
  mean_out.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw UsageError("ragged rows");
    for (std::size_t j = 0; j < d; ++j) mean_out[j] += r[j];
  }
  for (auto& m : mean_out) m /= static_cast<double>(n);
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = r[i] - mean_out[i];
      for (std::size_t j = i; j < d; ++j) cov[i][j] += di * (r[j] - mean_out[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i][j] /= static_cast<double>(n - 1);
      cov[j][i] = cov[i][j];
    }
  }
  return cov;
}

PCAModel fit_pca(const std::vector<std::vector<double>>& rows, double evr_target) {
  if (!(evr_target > 0.0 && evr_target <= 1.0)) throw UsageError("evr_target must lie in (0, 1]");
  if (rows.size() < 2) throw DataError("PCA needs at least 2 rows");
  PCAModel model;
  const auto cov = sample_covariance(rows, model.mean);
  auto eig = symmetric_eigen(cov);
  double total = 0.0;
  for (auto& l : eig.values) {
    l = std::max(l, 0.0);
    total += l;
  }
  if (!(total > 0.0)) throw DataError("all-zero variance");
  model.eigenvalues = eig.values;
  double cum = 0.0;
  bool reached = false;
  for (std::size_t i = 0; i < eig.values.size(); ++i) {
    const double ratio = eig.values[i] / total;
    model.explained_variance_ratios.push_back(ratio);
    if (!reached) {
      model.components.push_back(eig.vectors[i]);
      cum += ratio;
      reached = cum >= evr_target - 1e-12;
    }
  }
  return model;
}

std::vector<double> pca_transform(const PCAModel& model, std::span<const double> v) {
  if (v.size() != model.input_dim()) throw UsageError("dimension mismatch");
  std::vector<double> z;
  z.reserve(model.output_dim());
  for (const auto& c : model.components) {
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) acc += c[j] * (v[j] - model.mean[j]);
    z.push_back(acc);
  }
  return z;
}

std::vector<double> pca_inverse(const PCAModel& model, std::span<const double> z) {
  if (z.size() != model.output_dim()) throw UsageError("dimension mismatch");
  auto x = model.mean;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += z[i] * model.components[i][j];
  }
  return x;
}

FusionWeights fusion_weights(double q_v, double q_p) {
  if (!(q_v >= 0.0 && q_v <= 1.0) || !(q_p >= 0.0 && q_p <= 1.0)) {
    throw UsageError("quality values must lie in [0, 1]");
  }
  const double total = q_v + q_p;
  if (!(total > 0.0)) throw DataError("no usable modality");
  return {q_v / total, q_p / total};
}

double fuse_scores(const FusionWeights& w, const ModalityScore& s_v, const ModalityScore& s_p) {
  for (double s : {s_v.score, s_p.score}) {
    if (!(s >= 0.0 && s <= 1.0)) throw UsageError("scores must lie in [0, 1]");
  }
  if (!(w.w_v >= 0.0) || !(w.w_p >= 0.0)) throw UsageError("weights must be non-negative");
  const double lo = std::min(s_v.score, s_p.score);
  const double hi = std::max(s_v.score, s_p.score);
  return std::clamp(w.w_v * s_v.score + w.w_p * s_p.score, lo, hi);
}

}  // namespace fusewake::fusion
