#include "driftlab/stream.hpp"

#include <algorithm>
#include <cmath>

namespace driftlab::stream {

void DriftSchedule::validate(std::uint64_t total_steps) const {
  switch (kind) {
    case DriftKind::kStationary:
      break;
    case DriftKind::kTailed:
      if (imbalance_ratio < 1.0)
        throw ConfigError("stream: tailed imbalance_ratio must be >= 1");
      if (ramp_steps == 0) throw ConfigError("stream: tailed ramp_steps must be >= 1");
      break;
    case DriftKind::kSudden:
      if (total_steps > 0 && switch_step > total_steps)
        throw ConfigError("stream: sudden switch_step beyond total steps");
      break;
    case DriftKind::kGradual:
      if (start_step >= end_step)
        throw ConfigError("stream: gradual requires start_step < end_step");
      break;
  }
}

void SourceModel::validate() const {
  if (num_classes < 2) throw ConfigError("stream: source needs at least 2 classes");
  const double margin = 4.0 * sigma;
  auto dist = [&](const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      double d = a.at(i, k) - b.at(j, k);
      s += d * d;
    }
    return std::sqrt(s);
  };
  for (std::size_t i = 0; i < num_classes; ++i)
    for (std::size_t j = i + 1; j < num_classes; ++j)
      if (dist(means, i, means, j) <= margin)
        throw ConfigError("stream: ID means violate separability margin");
  for (std::size_t o = 0; o < ood_means.rows(); ++o)
    for (std::size_t i = 0; i < num_classes; ++i)
      if (dist(ood_means, o, means, i) <= margin)
        throw ConfigError("stream: OOD means violate separability margin");
}

SourceModel make_orthogonal_source(std::size_t num_classes, std::size_t dim, double sigma,
                                   std::size_t ood_classes, double radius, Rng rng) {
  if (num_classes + ood_classes > dim)
    throw ConfigError("stream: need num_classes + ood_classes <= dim for orthogonal means");
  const std::size_t total = num_classes + ood_classes;

  // Gram-Schmidt on gaussian draws gives a random orthonormal frame.
  std::vector<std::vector<double>> basis;
  Rng r = rng.child("source/means");
  while (basis.size() < total) {
    std::vector<double> v(dim);
    for (auto& x : v) x = r.gaussian();
    for (const auto& u : basis) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += v[k] * u[k];
      for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * u[k];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;  // rare near-dependent draw, retry
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }

  SourceModel src;
  src.num_classes = num_classes;
  src.dim = dim;
  src.sigma = sigma;
  src.means = Tensor({num_classes, dim});
  src.ood_means = Tensor({ood_classes, dim});
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t k = 0; k < dim; ++k) src.means.at(c, k) = radius * basis[c][k];
  for (std::size_t o = 0; o < ood_classes; ++o)
    for (std::size_t k = 0; k < dim; ++k)
      src.ood_means.at(o, k) = radius * basis[num_classes + o][k];
  src.validate();
  return src;
}

void AugConfig::validate() const {
  if (noise_sigma < 0.0) throw ConfigError("stream: noise_sigma must be >= 0");
  if (!(0.0 < scale_lo && scale_lo <= 1.0 && 1.0 <= scale_hi))
    throw ConfigError("stream: scale jitter range must satisfy 0 < lo <= 1 <= hi");
  if (!(0.0 <= mask_prob && mask_prob < 1.0))
    throw ConfigError("stream: mask_prob must lie in [0, 1)");
}

Tensor class_probs(const DriftSchedule& schedule, std::size_t num_classes, std::uint64_t t) {
  if (num_classes < 2) throw ConfigError("stream: class_probs needs C >= 2");
  Tensor p({1, num_classes});
  if (schedule.kind != DriftKind::kTailed || schedule.imbalance_ratio == 1.0) {
    for (std::size_t i = 0; i < num_classes; ++i) p.at(0, i) = 1.0 / (double)num_classes;
    return p;
  }
  // Log-linear ramp: log-weights go from 0 (uniform) at t=0 to
  // -i/(C-1) * ln(rho) at t >= ramp_steps.
  const double alpha = std::min<double>(1.0, (double)t / (double)schedule.ramp_steps);
  const double lr = std::log(schedule.imbalance_ratio);
  double sum = 0.0;
  for (std::size_t i = 0; i < num_classes; ++i) {
    double w = std::exp(-alpha * lr * (double)i / (double)(num_classes - 1));
    p.at(0, i) = w;
    sum += w;
  }
  for (std::size_t i = 0; i < num_classes; ++i) p.at(0, i) /= sum;
  return p;
}

namespace {
Tensor apply_transform(const Tensor& means, const MeanTransform& tf) {
  switch (tf.kind) {
    case TransformKind::kIdentity:
      return means;
    case TransformKind::kNegate: {
      Tensor out = means;
      for (double& v : out.vec()) v = -v;
      return out;
    }
    case TransformKind::kShift: {
      if (tf.shift.cols() != means.cols())
        throw ConfigError("stream: shift transform width mismatch");
      Tensor out = means;
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += tf.shift.at(0, c);
      return out;
    }
  }
  return means;
}
}  // namespace

Tensor active_means(const SourceModel& src, const DriftSchedule& schedule, std::uint64_t t) {
  switch (schedule.kind) {
    case DriftKind::kStationary:
    case DriftKind::kTailed:
      return src.means;
    case DriftKind::kSudden:
      return t >= schedule.switch_step ? apply_transform(src.means, schedule.post_transform)
                                       : src.means;
    case DriftKind::kGradual: {
      if (schedule.target_means.rows() != src.means.rows() ||
          schedule.target_means.cols() != src.means.cols())
        throw ConfigError("stream: gradual target_means shape mismatch");
      double a;
      if (t <= schedule.start_step) {
        a = 0.0;
      } else if (t >= schedule.end_step) {
        a = 1.0;
      } else {
        a = (double)(t - schedule.start_step) /
            (double)(schedule.end_step - schedule.start_step);
      }
      Tensor out = src.means;
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - a) * out[i] + a * schedule.target_means[i];
      return out;
    }
  }
  return src.means;
}

StreamBatch sample_batch(const SourceModel& src, const DriftSchedule& schedule, std::uint64_t t,
                         std::size_t n, Rng rng) {
  if (n < 1) throw ConfigError("stream: sample_batch needs n >= 1");
  const std::size_t C = src.num_classes;
  const std::size_t d = src.dim;
  Tensor probs = class_probs(schedule, C, t);
  Tensor means = active_means(src, schedule, t);

  StreamBatch batch;
  batch.timestamp = t;
  batch.class_probs = probs;
  batch.features = Tensor({n, d});
  batch.class_ids.resize(n);

  Rng rc = rng.child("class");
  Rng rf = rng.child("feature");
  for (std::size_t i = 0; i < n; ++i) {
    double u = rc.uniform();
    std::size_t c = C - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < C; ++k) {
      acc += probs.at(0, k);
      if (u < acc) {
        c = k;
        break;
      }
    }
    batch.class_ids[i] = (int)c;
    for (std::size_t k = 0; k < d; ++k)
      batch.features.at(i, k) = means.at(c, k) + src.sigma * rf.gaussian();
  }
  return batch;
}

namespace {
Tensor one_view(const Tensor& x, const AugConfig& cfg, Rng rng) {
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out = x;
  Rng rs = rng.child("scale");
  Rng rn = rng.child("noise");
  Rng rm = rng.child("mask");
  for (std::size_t i = 0; i < n; ++i) {
    double s = rs.uniform(cfg.scale_lo, cfg.scale_hi);
    for (std::size_t k = 0; k < d; ++k) {
      double v = s * out.at(i, k);
      if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * rn.gaussian();
      if (cfg.mask_prob > 0.0 && rm.uniform() < cfg.mask_prob) v = 0.0;
      out.at(i, k) = v;
    }
  }
  return out;
}
}  // namespace

std::pair<Tensor, Tensor> augment_pair(const StreamBatch& batch, const AugConfig& cfg, Rng rng) {
  cfg.validate();
  return {one_view(batch.features, cfg, rng.child("view_a")),
          one_view(batch.features, cfg, rng.child("view_b"))};
}

Tensor sample_ood(const SourceModel& src, std::size_t n, Rng rng) {
  if (src.ood_means.rows() < 1) throw ConfigError("stream: source has no OOD components");
  const std::size_t d = src.dim;
  Tensor out({n, d});
  Rng rc = rng.child("ood/class");
  Rng rf = rng.child("ood/feature");
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = rc.next_below(src.ood_means.rows());
    for (std::size_t k = 0; k < d; ++k)
      out.at(i, k) = src.ood_means.at(c, k) + src.sigma * rf.gaussian();
  }
  return out;
}

}  // namespace driftlab::stream
