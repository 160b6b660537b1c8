#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusewake/physio.hpp"
#include "fusewake/vision.hpp"

namespace fusewake::fusion {

struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

FeatureVector to_feature_vector(const vision::VisionFeatures& fv);
FeatureVector to_feature_vector(const physio::PhysioFeatures& fp);

// [vision ; physio] with "v." / "p." column prefixes.
FeatureVector concat_features(const FeatureVector& vision, const FeatureVector& physio);
// Throws DataError("missing modality") when vision is flagged missing.
FeatureVector concat_features(const vision::VisionFeatures& fv, const physio::PhysioFeatures& fp);

// Rows are windows; labels are 1 for DROWSY, 0 for ALERT; groups carry the
// subject id of each row.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> groups;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return columns.size(); }
  std::vector<double> column(std::size_t j) const;
  std::size_t column_index(const std::string& name) const;

  void add_row(std::vector<double> values, int label, std::string group = {});
  FeatureMatrix select_columns(std::span<const std::string> names) const;
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const;
  void validate() const;
};

// Per-column z-score parameters learned on training rows. Columns with zero
// variance are dropped and listed in `dropped`.
struct ScalerStats {
  std::vector<std::string> columns;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<std::string> dropped;

  FeatureMatrix apply(const FeatureMatrix& m) const;
  // `v` is laid out as `input_columns`; returns the retained standardized columns.
  std::vector<double> apply(std::span<const double> v, std::span<const std::string> input_columns) const;
};

ScalerStats fit_scaler(const FeatureMatrix& m);

struct MiScore {
  std::string column;
  double mi_bits = 0.0;
};

// Equal-frequency bin index of each value; ties share the bin of their first rank.
std::vector<int> equal_frequency_bins(std::span<const double> values, int bins);
double mutual_information_bits(std::span<const int> x_bins, std::span<const int> labels);
std::vector<MiScore> rank_features_mi(const FeatureMatrix& m, int bins = 10);

// Returns one weight per column of its (standardized) input.
using LinearTrainer = std::function<std::vector<double>(const FeatureMatrix&)>;

// Recursive feature elimination down to k columns, in original column order.
std::vector<std::string> rfe(const FeatureMatrix& m, std::size_t k, const LinearTrainer& trainer);

// MI ranking keeps the best 2k candidates, RFE keeps k of those.
std::vector<std::string> select_features(const FeatureMatrix& standardized, std::size_t k, int bins,
                                         const LinearTrainer& trainer);

struct PCAModel {
  std::vector<double> mean;
  // Retained components, rows sorted by decreasing eigenvalue.
  std::vector<std::vector<double>> components;
  // Eigenvalues and explained-variance ratios of all dimensions.
  std::vector<double> eigenvalues;
  std::vector<double> explained_variance_ratios;

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.size(); }
};

struct EigenDecomposition {
  std::vector<double> values;               // decreasing
  std::vector<std::vector<double>> vectors;  // row i pairs with values[i]
};

// Cyclic Jacobi rotations for a symmetric matrix. Each eigenvector's largest
// magnitude entry is made positive.
EigenDecomposition symmetric_eigen(std::vector<std::vector<double>> a);

std::vector<std::vector<double>> sample_covariance(const std::vector<std::vector<double>>& rows,
                                                   std::vector<double>& mean_out);

PCAModel fit_pca(const std::vector<std::vector<double>>& rows, double evr_target);
std::vector<double> pca_transform(const PCAModel& model, std::span<const double> v);
std::vector<double> pca_inverse(const PCAModel& model, std::span<const double> z);

struct FusionWeights {
  double w_v = 0.5;
  double w_p = 0.5;
};

struct ModalityScore {
  double score = 0.5;
  double quality = 1.0;
};

FusionWeights fusion_weights(double q_v, double q_p);
double fuse_scores(const FusionWeights& w, const ModalityScore& s_v, const ModalityScore& s_p);

}  // namespace fusewake::fusion
