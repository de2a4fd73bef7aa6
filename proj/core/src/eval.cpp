#include "driftlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftlab/numkern.hpp"
#include "driftlab/rng.hpp"

namespace driftlab::eval {

namespace {
constexpr double kRadToDeg = 180.0 / M_PI;

double angle_deg(double cosine) {
  return std::acos(std::clamp(cosine, -1.0, 1.0)) * kRadToDeg;
}

double dot_row(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(j, k);
  return s;
}

/// Macro-aggregate per-class values into split-wise means plus All.
SplitValues aggregate(const std::vector<double>& per_class, const std::vector<Split>& splits) {
  if (per_class.size() != splits.size())
    throw EvalError("eval: per-class values and split assignment disagree");
  std::array<double, 3> sum{};
  std::array<std::size_t, 3> count{};
  double total = 0.0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    sum[(int)splits[c]] += per_class[c];
    count[(int)splits[c]] += 1;
    total += per_class[c];
  }
  SplitValues out;
  out.many = count[0] ? sum[0] / (double)count[0] : 0.0;
  out.medium = count[1] ? sum[1] / (double)count[1] : 0.0;
  out.few = count[2] ? sum[2] / (double)count[2] : 0.0;
  out.all = per_class.empty() ? 0.0 : total / (double)per_class.size();
  return out;
}
}  // namespace

void SplitThresholds::validate() const {
  if (few_max > many_min) throw EvalError("eval: few_max must be <= many_min");
}

Split SplitThresholds::classify(std::size_t train_count) const {
  if (train_count > many_min) return Split::kMany;
  if (train_count < few_max) return Split::kFew;
  return Split::kMedium;
}

std::vector<Split> assign_splits(const std::vector<std::size_t>& train_counts,
                                 const SplitThresholds& thresholds) {
  thresholds.validate();
  std::vector<Split> out;
  out.reserve(train_counts.size());
  for (auto c : train_counts) out.push_back(thresholds.classify(c));
  return out;
}

double SplitValues::by_split(Split s) const {
  switch (s) {
    case Split::kMany: return many;
    case Split::kMedium: return medium;
    case Split::kFew: return few;
  }
  return all;
}

Tensor extract_features(const model::ParamPair& pair, const Tensor& data) {
  return l2_normalize_rows(model::forward_student(pair, data));
}

Tensor class_centroids(const Tensor& features, const std::vector<int>& labels, std::size_t C) {
  if (features.rows() != labels.size())
    throw EvalError("eval: features/labels length mismatch");
  const std::size_t e = features.cols();
  Tensor sums({C, e});
  std::vector<std::size_t> counts(C, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int c = labels[i];
    if (c < 0 || (std::size_t)c >= C) throw EvalError("eval: label out of range");
    counts[(std::size_t)c]++;
    for (std::size_t k = 0; k < e; ++k) sums.at((std::size_t)c, k) += features.at(i, k);
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (counts[c] == 0)
      throw EvalError("eval: class " + std::to_string(c) + " has no samples for centroid");
    double norm = 0.0;
    for (std::size_t k = 0; k < e; ++k) {
      sums.at(c, k) /= (double)counts[c];
      norm += sums.at(c, k) * sums.at(c, k);
    }
    norm = std::sqrt(norm);
    if (norm < 1e-9)
      throw EvalError("eval: degenerate centroid for class " + std::to_string(c));
    for (std::size_t k = 0; k < e; ++k) sums.at(c, k) /= norm;
  }
  return sums;
}

SplitValues intra_compactness(const Tensor& features, const std::vector<int>& labels,
                              const Tensor& centroids, const std::vector<Split>& splits) {
  const std::size_t C = centroids.rows();
  std::vector<double> sum(C, 0.0);
  std::vector<std::size_t> count(C, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = (std::size_t)labels[i];
    sum[c] += angle_deg(dot_row(features, i, centroids, c));
    count[c]++;
  }
  std::vector<double> per_class(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (count[c] == 0) throw EvalError("eval: class " + std::to_string(c) + " has no samples");
    per_class[c] = sum[c] / (double)count[c];
  }
  return aggregate(per_class, splits);
}

SplitValues inter_separability(const Tensor& centroids, const std::vector<Split>& splits) {
  const std::size_t C = centroids.rows();
  if (C < 2) throw EvalError("eval: inter_separability needs C >= 2");
  std::vector<double> per_class(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t o = 0; o < C; ++o) {
      if (o == c) continue;
      s += angle_deg(dot_row(centroids, c, centroids, o));
    }
    per_class[c] = s / (double)(C - 1);
  }
  return aggregate(per_class, splits);
}

SplitValues id_ood_separability(const Tensor& centroids, const Tensor& ood_features,
                                const std::vector<Split>& splits) {
  if (ood_features.rows() == 0) throw EvalError("eval: no OOD features");
  const std::size_t C = centroids.rows();
  std::vector<double> per_class(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < ood_features.rows(); ++i)
      s += angle_deg(dot_row(centroids, c, ood_features, i));
    per_class[c] = s / (double)ood_features.rows();
  }
  return aggregate(per_class, splits);
}

ProbeReport linear_probe(const Tensor& train_features, const std::vector<int>& train_labels,
                         const Tensor& test_features, const std::vector<int>& test_labels,
                         const std::vector<Split>& splits, const ProbeConfig& cfg) {
  const std::size_t C = splits.size();
  const std::size_t e = train_features.cols();
  const std::size_t n = train_features.rows();
  if (n != train_labels.size()) throw EvalError("eval: probe train size mismatch");

  std::vector<std::size_t> counts(C, 0);
  for (int l : train_labels) {
    if (l < 0 || (std::size_t)l >= C) throw EvalError("eval: probe label out of range");
    counts[(std::size_t)l]++;
  }
  for (std::size_t c = 0; c < C; ++c)
    if (counts[c] == 0)
      throw EvalError("eval: class " + std::to_string(c) + " absent from probe training set");

  // Full-batch softmax-regression GD; zero init is deterministic, the seed
  // only matters if a config ever switches to random init.
  (void)cfg.seed;
  Tensor W({e, C});
  Tensor b({1, C});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tensor logits = add_rowvec(matmul(train_features, W), b);
    Tensor probs = softmax_rows(logits);
    for (std::size_t i = 0; i < n; ++i) probs.at(i, (std::size_t)train_labels[i]) -= 1.0;
    Tensor gw = scale(matmul_tn(train_features, probs), 1.0 / (double)n);
    Tensor gb({1, C});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < C; ++c) gb.at(0, c) += probs.at(i, c) / (double)n;
    for (std::size_t k = 0; k < W.size(); ++k) W[k] -= cfg.lr * gw[k];
    for (std::size_t k = 0; k < C; ++k) b.at(0, k) -= cfg.lr * gb.at(0, k);
  }

  Tensor logits = add_rowvec(matmul(test_features, W), b);
  std::vector<std::size_t> correct(C, 0), total(C, 0);
  for (std::size_t i = 0; i < test_features.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    const auto truth = (std::size_t)test_labels[i];
    total[truth]++;
    if (best == truth) correct[truth]++;
  }
  ProbeReport report;
  report.per_class.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (total[c] == 0) throw EvalError("eval: class " + std::to_string(c) + " absent from test set");
    report.per_class[c] = (double)correct[c] / (double)total[c];
  }
  report.top1 = aggregate(report.per_class, splits);
  return report;
}

double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw EvalError("eval: auroc on empty input");
  // Joint sort, then sum ID ranks (midranks for ties): U = R_id - n_id(n_id+1)/2.
  struct Entry { double score; bool is_id; };
  std::vector<Entry> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * (double)((i + 1) + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (all[k].is_id) rank_sum += midrank;
    i = j;
  }
  const double n1 = (double)id_scores.size();
  const double n0 = (double)ood_scores.size();
  const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  return u / (n1 * n0);
}

double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                  double tpr_target) {
  if (id_scores.empty() || ood_scores.empty()) throw EvalError("eval: fpr_at_tpr on empty input");
  std::vector<double> sorted = id_scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Largest threshold keeping at least ceil(target * n) ID scores above it.
  const auto need = (std::size_t)std::ceil(tpr_target * (double)sorted.size());
  const double threshold = sorted[std::min(need, sorted.size()) - 1];
  std::size_t above = 0;
  for (double s : ood_scores)
    if (s >= threshold) ++above;
  return (double)above / (double)ood_scores.size();
}

std::vector<double> ood_score(const Tensor& features, const Tensor& centroids) {
  std::vector<double> scores(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double best = -1.0;
    for (std::size_t c = 0; c < centroids.rows(); ++c)
      best = std::max(best, dot_row(features, i, centroids, c));
    scores[i] = best;
  }
  return scores;
}

}  // namespace driftlab::eval
