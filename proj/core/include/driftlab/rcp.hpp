#pragma once

#include <functional>
#include <optional>
#include <string>

#include "driftlab/graph.hpp"
#include "driftlab/model.hpp"
#include "driftlab/optimizer.hpp"
#include "driftlab/stream.hpp"

namespace driftlab::rcp {

/// Raised when a training step produces a non-finite loss.
struct TrainingError : std::runtime_error {
  TrainingError(std::uint64_t step, const std::string& config_hash);
  std::uint64_t step = 0;
};

/// Drift adaptation window and contrastive temperature. The temperature is
/// a distinct knob from the window length even though both ride the same
/// symbol elsewhere.
struct WindowConfig {
  std::size_t window = 1;
  double temperature = 0.2;
  bool qk_scale = false;     // enable 1/sqrt(e) logit scaling (ablation)
  bool intervention = true;  // off = plain momentum contrast baseline

  void validate() const;
};

/// Per-window query/key/value tensors plus the row-stochastic weights A and
/// the aggregated output C = A * V.
struct InterventionTensors {
  Tensor Q, K, V, A, C;
};

/// A = softmax_rows(Q * K^T * scale), C = A * V. K carries no gradient in
/// training; this value-level form is for inspection and tests.
InterventionTensors intervene(const Tensor& Q, const Tensor& K, const Tensor& V,
                              const WindowConfig& cfg);

/// Student/teacher features for both views staged on a tape.
/// k1/k2 come from the teacher and are recorded as constants.
struct FormedViews {
  NodeId v1 = -1, q1 = -1, v2 = -1, q2 = -1;
  NodeId k1 = -1, k2 = -1;
};

FormedViews form_views(Tape& tape, const model::ParamPair& pair,
                       const model::MlpTapeParams& enc, const model::MlpTapeParams& head,
                       const Tensor& view_a, const Tensor& view_b);

/// C1 = intervene(Q1, K2, V1).C, C2 = intervene(Q2, K1, V2).C on the tape.
std::pair<NodeId, NodeId> symmetric_intervention(Tape& tape, const FormedViews& views,
                                                 const WindowConfig& cfg);

/// Temperature-scaled InfoNCE over the window: rows are L2-normalized, the
/// positive is the diagonal, negatives are every other window member, and the
/// two directions (C1 vs C2, C2 vs C1) are averaged. Scalar node.
NodeId info_nce(Tape& tape, NodeId c1, NodeId c2, double temperature);

/// Value-level InfoNCE for tests and closed-form checks; same code path as
/// the tape op.
double info_nce_value(const Tensor& c1, const Tensor& c2, double temperature);

/// Everything train_step mutates across steps.
struct TrainState {
  model::ParamPair pair;
  AdamW optim;
  std::string config_hash;  // carried into TrainingError
};

/// One full step: augment -> form views -> symmetric intervention -> InfoNCE
/// -> backprop -> AdamW update -> EMA update. Returns the finite loss.
double train_step(TrainState& state, const stream::StreamBatch& batch,
                  const stream::AugConfig& aug, const WindowConfig& win, Rng rng);

struct TraceRow {
  std::uint64_t step;
  double loss;
  double lr;
  double lambda;
  std::size_t window;
};

struct PretrainSetup {
  stream::SourceModel source;
  stream::DriftSchedule schedule;
  stream::AugConfig aug;
  model::MlpSpec encoder;
  model::HeadSpec head;
  double momentum = 0.999;
  WindowConfig window;
  OptimConfig optim;  // base_lr here is pre-scaling; pretrain applies W/256
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  /// Called after the checkpoint cadence and at the end of the run.
  std::function<void(std::uint64_t step, const model::ParamPair&)> checkpoint_hook;
  std::uint64_t checkpoint_every = 0;
};

struct PretrainResult {
  model::ParamPair pair;
  std::vector<TraceRow> trace;
};

/// Deterministic full run; the trace has exactly `steps` rows.
PretrainResult pretrain(const PretrainSetup& setup);

}  // namespace driftlab::rcp
