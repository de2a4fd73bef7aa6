#pragma once

#include <cstdint>
#include <vector>

#include "driftlab/rng.hpp"
#include "driftlab/tensor.hpp"

namespace driftlab::stream {

struct ConfigError : ContractError {
  using ContractError::ContractError;
};

enum class DriftKind { kStationary, kTailed, kSudden, kGradual };

enum class TransformKind { kIdentity, kNegate, kShift };

/// Transform applied to the class means by sudden drift.
struct MeanTransform {
  TransformKind kind = TransformKind::kIdentity;
  Tensor shift;  // [1 x d], used when kind == kShift
};

/// When and how the generating distribution moves.
struct DriftSchedule {
  DriftKind kind = DriftKind::kStationary;
  // tailed
  double imbalance_ratio = 1.0;  // rho >= 1; rho == 1 degenerates to stationary
  std::uint64_t ramp_steps = 1;
  // sudden
  std::uint64_t switch_step = 0;
  MeanTransform post_transform;
  // gradual
  std::uint64_t start_step = 0;
  std::uint64_t end_step = 1;
  Tensor target_means;  // [C x d]

  void validate(std::uint64_t total_steps) const;
};

/// Gaussian mixture source: C in-distribution classes plus disjoint OOD
/// components, with a documented separability margin (min pairwise mean
/// distance > 4 * sigma at construction).
struct SourceModel {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  Tensor means;      // [C x d]
  double sigma = 1.0;
  Tensor ood_means;  // [C_ood x d]

  void validate() const;
};

/// Build a source whose ID and OOD means sit on mutually orthogonal
/// directions of radius `radius` (margin radius*sqrt(2) between any pair).
/// Requires num_classes + ood_classes <= dim.
SourceModel make_orthogonal_source(std::size_t num_classes, std::size_t dim, double sigma,
                                   std::size_t ood_classes, double radius, Rng rng);

struct StreamBatch {
  Tensor features;              // [n x d]
  std::vector<int> class_ids;   // evaluation only, never visible to the loss
  std::uint64_t timestamp = 0;
  Tensor class_probs;           // snapshot [1 x C]
};

struct AugConfig {
  double noise_sigma = 0.0;
  double scale_lo = 1.0;
  double scale_hi = 1.0;
  double mask_prob = 0.0;  // in [0, 1)

  void validate() const;
};

/// Class distribution at step t. Tailed drift ramps log-linearly from the
/// uniform simplex at t=0 to p_i proportional to rho^(-i/(C-1)) at t >= ramp;
/// every other schedule is uniform.
Tensor class_probs(const DriftSchedule& schedule, std::size_t num_classes, std::uint64_t t);

/// Class means active at step t (sudden / gradual schedules move them).
Tensor active_means(const SourceModel& src, const DriftSchedule& schedule, std::uint64_t t);

StreamBatch sample_batch(const SourceModel& src, const DriftSchedule& schedule, std::uint64_t t,
                         std::size_t n, Rng rng);

/// Two independently augmented views: mask (.) (scale * x + noise), with a
/// per-sample scale jitter and per-entry noise/mask.
std::pair<Tensor, Tensor> augment_pair(const StreamBatch& batch, const AugConfig& cfg, Rng rng);

Tensor sample_ood(const SourceModel& src, std::size_t n, Rng rng);

}  // namespace driftlab::stream
