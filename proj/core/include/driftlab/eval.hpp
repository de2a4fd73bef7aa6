#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "driftlab/model.hpp"
#include "driftlab/tensor.hpp"

namespace driftlab::eval {

struct EvalError : ContractError {
  using ContractError::ContractError;
};

enum class Split { kMany = 0, kMedium = 1, kFew = 2 };

/// Class-count thresholds: train count > many_min => Many, < few_max => Few,
/// otherwise Medium.
struct SplitThresholds {
  std::size_t many_min = 100;
  std::size_t few_max = 20;

  void validate() const;
  Split classify(std::size_t train_count) const;
};

/// Per-class split assignment derived from training-set class counts.
std::vector<Split> assign_splits(const std::vector<std::size_t>& train_counts,
                                 const SplitThresholds& thresholds);

/// Split-wise value plus the All (macro over every class) aggregate.
struct SplitValues {
  double many = 0.0, medium = 0.0, few = 0.0, all = 0.0;
  double by_split(Split s) const;
};

struct AngleReport {
  SplitValues intra;    // degrees, lower = tighter
  SplitValues inter;    // degrees, higher = better separated
  SplitValues id_ood;   // degrees, higher = better separated
};

struct ProbeReport {
  SplitValues top1;
  std::vector<double> per_class;
};

struct OodReport {
  double auroc = 0.0;
  double fpr_at_tpr95 = 0.0;
};

/// Student-encoder outputs (pre-head), L2 row-normalized.
Tensor extract_features(const model::ParamPair& pair, const Tensor& data);

/// Per-class mean of normalized features, re-normalized to unit norm.
/// Errors on empty classes and on degenerate (near-zero) means.
Tensor class_centroids(const Tensor& features, const std::vector<int>& labels, std::size_t C);

/// Mean angle between samples and their class centroid, macro-averaged per
/// class, then per split; All is macro over all classes.
SplitValues intra_compactness(const Tensor& features, const std::vector<int>& labels,
                              const Tensor& centroids, const std::vector<Split>& splits);

/// Per class: mean angle to the other centroids; macro-aggregated as above.
SplitValues inter_separability(const Tensor& centroids, const std::vector<Split>& splits);

/// Per ID class: mean angle between its centroid and every OOD feature.
SplitValues id_ood_separability(const Tensor& centroids, const Tensor& ood_features,
                                const std::vector<Split>& splits);

struct ProbeConfig {
  double lr = 0.5;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
};

/// Multinomial logistic regression on frozen features, full-batch gradient
/// descent, softmax cross-entropy, no weight decay. Top-1 on the test set,
/// split-wise.
ProbeReport linear_probe(const Tensor& train_features, const std::vector<int>& train_labels,
                         const Tensor& test_features, const std::vector<int>& test_labels,
                         const std::vector<Split>& splits, const ProbeConfig& cfg);

/// Mann-Whitney rank statistic with half credit for ties. Higher score means
/// more in-distribution.
double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

/// Fraction of OOD scores above the largest threshold that keeps ID recall
/// at or above tpr_target.
double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                  double tpr_target = 0.95);

/// score = max over classes of cosine(feature, centroid); inputs normalized.
std::vector<double> ood_score(const Tensor& features, const Tensor& centroids);

}  // namespace driftlab::eval
