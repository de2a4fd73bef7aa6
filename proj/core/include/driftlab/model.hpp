#pragma once

#include <vector>

#include "driftlab/graph.hpp"
#include "driftlab/rng.hpp"
#include "driftlab/tensor.hpp"

namespace driftlab::model {

struct ConfigError : ContractError {
  using ContractError::ContractError;
};

enum class Activation { kRelu, kIdentity };

/// Feed-forward encoder architecture: input d -> hidden... -> embedding e.
/// Hidden layers use the activation; the final layer is linear.
struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  void validate() const;
};

/// Projection head h: embedding e -> hidden -> e (2-layer MLP).
struct HeadSpec {
  std::size_t embedding = 0;
  std::size_t hidden = 0;

  MlpSpec as_mlp() const { return MlpSpec{{embedding, hidden, embedding}}; }
  void validate() const;
};

/// One MLP's parameters: weights[i] is [in x out], biases[i] is [1 x out].
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

/// Mirrored student/teacher parameter sets. The teacher mirrors the encoder
/// only (the projection head exists on the student side alone) and never
/// receives a gradient; it moves solely through ema_update.
struct ParamPair {
  MlpSpec enc_spec;
  HeadSpec head_spec;
  MlpParams student_enc;
  MlpParams student_head;
  MlpParams teacher_enc;
  double momentum = 0.999;
};

/// Fan-in scaled uniform init, U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero
/// biases. Teacher starts as an exact copy of the student.
ParamPair init_params(const MlpSpec& spec, const HeadSpec& head, Rng rng);

// Plain (no-tape) forward passes; used by the teacher branch and evaluation.
Tensor forward_mlp_plain(const MlpSpec& spec, const MlpParams& p, const Tensor& x);
Tensor forward_student(const ParamPair& pair, const Tensor& x);
Tensor forward_head(const ParamPair& pair, const Tensor& v);
/// Gradient recording disabled by construction (no tape involved).
Tensor forward_teacher(const ParamPair& pair, const Tensor& x);

/// Parameter leaves staged onto a tape for one training step.
struct MlpTapeParams {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
};

MlpTapeParams stage_params(Tape& tape, const MlpParams& p);
NodeId forward_mlp(Tape& tape, const MlpSpec& spec, const MlpTapeParams& p, NodeId x);

/// theta_m := lambda * theta_m + (1 - lambda) * theta_g, elementwise.
/// Student untouched. lambda must lie in [0, 1).
void ema_update(ParamPair& pair, double lambda);

}  // namespace driftlab::model
