#include "driftlab/rcp.hpp"

#include <cmath>

#include "driftlab/numkern.hpp"

namespace driftlab::rcp {

TrainingError::TrainingError(std::uint64_t s, const std::string& config_hash)
    : std::runtime_error("non-finite loss at step " + std::to_string(s) + " (config " +
                         config_hash + ")"),
      step(s) {}

void WindowConfig::validate() const {
  if (window < 1) throw ConfigError("rcp: window must be >= 1");
  if (temperature <= 0.0) throw ConfigError("rcp: temperature must be positive");
}

InterventionTensors intervene(const Tensor& Q, const Tensor& K, const Tensor& V,
                              const WindowConfig& cfg) {
  cfg.validate();
  if (!Q.same_shape(K) || !Q.same_shape(V))
    throw DimensionError("intervene: Q " + Q.shape_str() + ", K " + K.shape_str() + ", V " +
                         V.shape_str() + " must agree");
  InterventionTensors out;
  out.Q = Q;
  out.K = K;
  out.V = V;
  Tensor logits = matmul_nt(Q, K);
  if (cfg.qk_scale) logits = scale(logits, 1.0 / std::sqrt((double)Q.cols()));
  out.A = softmax_rows(logits);
  out.C = matmul(out.A, V);
  return out;
}

FormedViews form_views(Tape& tape, const model::ParamPair& pair,
                       const model::MlpTapeParams& enc, const model::MlpTapeParams& head,
                       const Tensor& view_a, const Tensor& view_b) {
  if (!view_a.same_shape(view_b))
    throw DimensionError("form_views: views disagree, " + view_a.shape_str() + " vs " +
                         view_b.shape_str());
  const model::MlpSpec head_mlp = pair.head_spec.as_mlp();
  FormedViews f;
  NodeId xa = tape.constant(view_a);
  NodeId xb = tape.constant(view_b);
  f.v1 = model::forward_mlp(tape, pair.enc_spec, enc, xa);
  f.q1 = model::forward_mlp(tape, head_mlp, head, f.v1);
  f.v2 = model::forward_mlp(tape, pair.enc_spec, enc, xb);
  f.q2 = model::forward_mlp(tape, head_mlp, head, f.v2);
  // Teacher branch runs off-tape; recording it as constants is the
  // stop-gradient.
  f.k1 = tape.constant(model::forward_teacher(pair, view_a));
  f.k2 = tape.constant(model::forward_teacher(pair, view_b));
  return f;
}

namespace {
NodeId intervene_on_tape(Tape& tape, NodeId q, NodeId k, NodeId v, const WindowConfig& cfg) {
  NodeId logits = tape.matmul_nt(q, k);
  if (cfg.qk_scale)
    logits = tape.scale(logits, 1.0 / std::sqrt((double)tape.value(q).cols()));
  NodeId a = tape.softmax_rows(logits);
  return tape.matmul(a, v);
}
}  // namespace

std::pair<NodeId, NodeId> symmetric_intervention(Tape& tape, const FormedViews& f,
                                                 const WindowConfig& cfg) {
  cfg.validate();
  NodeId c1 = intervene_on_tape(tape, f.q1, f.k2, f.v1, cfg);
  NodeId c2 = intervene_on_tape(tape, f.q2, f.k1, f.v2, cfg);
  return {c1, c2};
}

NodeId info_nce(Tape& tape, NodeId c1, NodeId c2, double temperature) {
  if (temperature <= 0.0) throw ConfigError("rcp: temperature must be positive");
  NodeId n1 = tape.l2_normalize_rows(c1);
  NodeId n2 = tape.l2_normalize_rows(c2);
  NodeId s = tape.matmul_nt(n1, n2);
  // nce_diag already averages the row and column directions, which is the
  // (C1 vs C2) + (C2 vs C1) symmetrization.
  return tape.nce_diag(s, temperature);
}

double info_nce_value(const Tensor& c1, const Tensor& c2, double temperature) {
  Tape tape;
  NodeId a = tape.constant(c1);
  NodeId b = tape.constant(c2);
  return tape.scalar_value(info_nce(tape, a, b, temperature));
}

double train_step(TrainState& state, const stream::StreamBatch& batch,
                  const stream::AugConfig& aug, const WindowConfig& win, Rng rng) {
  win.validate();
  if (batch.features.rows() != win.window)
    throw ConfigError("rcp: batch size " + std::to_string(batch.features.rows()) +
                      " does not match window " + std::to_string(win.window));
  auto [view_a, view_b] = stream::augment_pair(batch, aug, rng.child("aug"));

  Tape tape;
  model::MlpTapeParams enc = model::stage_params(tape, state.pair.student_enc);
  model::MlpTapeParams head = model::stage_params(tape, state.pair.student_head);
  FormedViews f = form_views(tape, state.pair, enc, head, view_a, view_b);

  NodeId loss;
  if (win.intervention) {
    auto [c1, c2] = symmetric_intervention(tape, f, win);
    loss = info_nce(tape, c1, c2, win.temperature);
  } else {
    // Plain momentum contrast at matched budget: student queries against
    // teacher keys of the other view, both directions.
    NodeId l1 = info_nce(tape, f.q1, f.k2, win.temperature);
    NodeId l2 = info_nce(tape, f.q2, f.k1, win.temperature);
    loss = tape.scale(tape.add(l1, l2), 0.5);
  }

  const double loss_value = tape.scalar_value(loss);
  if (!std::isfinite(loss_value)) throw TrainingError(batch.timestamp, state.config_hash);

  tape.backward(loss);

  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  std::vector<bool> decay;
  auto gather = [&](model::MlpParams& p, const model::MlpTapeParams& staged) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      params.push_back(&p.weights[l]);
      grads.push_back(&tape.grad(staged.weights[l]));
      decay.push_back(true);
      params.push_back(&p.biases[l]);
      grads.push_back(&tape.grad(staged.biases[l]));
      decay.push_back(false);
    }
  };
  gather(state.pair.student_enc, enc);
  gather(state.pair.student_head, head);

  // A head bias may be unreached when its gradient is exactly zero; feed a
  // zero tensor so the optimizer sees aligned lists.
  std::vector<Tensor> zero_store;
  zero_store.reserve(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i]->size() == 0) {
      zero_store.emplace_back(params[i]->shape());
      grads[i] = &zero_store.back();
    }
  }

  state.optim.step(params, grads, decay);
  model::ema_update(state.pair, state.pair.momentum);
  return loss_value;
}

PretrainResult pretrain(const PretrainSetup& setup) {
  setup.window.validate();
  setup.aug.validate();
  setup.schedule.validate(setup.steps);

  OptimConfig optim = setup.optim;
  optim.base_lr *= (double)setup.window.window / 256.0;  // linear batch scaling
  optim.validate();

  Rng root(setup.seed);
  model::ParamPair pair = model::init_params(setup.encoder, setup.head, root.child("init"));
  pair.momentum = setup.momentum;

  TrainState state{std::move(pair), AdamW(optim), setup.config_hash};
  PretrainResult result;
  result.trace.reserve(setup.steps);

  for (std::uint64_t t = 0; t < setup.steps; ++t) {
    stream::StreamBatch batch = stream::sample_batch(
        setup.source, setup.schedule, t, setup.window.window, root.child("stream").child(t));
    const double lr = optim.lr_at(t);
    double loss = train_step(state, batch, setup.aug, setup.window, root.child("step").child(t));
    result.trace.push_back({t, loss, lr, setup.momentum, setup.window.window});
    if (setup.checkpoint_hook && setup.checkpoint_every > 0 && (t + 1) % setup.checkpoint_every == 0)
      setup.checkpoint_hook(t + 1, state.pair);
  }
  if (setup.checkpoint_hook) setup.checkpoint_hook(setup.steps, state.pair);
  result.pair = std::move(state.pair);
  return result;
}

}  // namespace driftlab::rcp
