#include "driftlab/model.hpp"

#include <cmath>

#include "driftlab/numkern.hpp"

namespace driftlab::model {

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ConfigError("model: encoder needs at least one layer");
  for (auto w : layer_widths)
    if (w < 1) throw ConfigError("model: all layer widths must be >= 1");
}

void HeadSpec::validate() const {
  if (embedding < 1 || hidden < 1) throw ConfigError("model: head widths must be >= 1");
}

namespace {
MlpParams init_mlp(const MlpSpec& spec, Rng rng) {
  MlpParams p;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const std::size_t fan_in = spec.layer_widths[l];
    const std::size_t fan_out = spec.layer_widths[l + 1];
    const double bound = std::sqrt(6.0 / (double)fan_in);
    Tensor w({fan_in, fan_out});
    Rng r = rng.child(l);
    for (double& v : w.vec()) v = r.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Tensor({1, fan_out}));
  }
  return p;
}
}  // namespace

ParamPair init_params(const MlpSpec& spec, const HeadSpec& head, Rng rng) {
  spec.validate();
  head.validate();
  if (head.embedding != spec.output_width())
    throw ConfigError("model: head embedding width must equal encoder output width");
  ParamPair pair;
  pair.enc_spec = spec;
  pair.head_spec = head;
  pair.student_enc = init_mlp(spec, rng.child("enc"));
  pair.student_head = init_mlp(head.as_mlp(), rng.child("head"));
  pair.teacher_enc = pair.student_enc;  // exact copy at t=0
  return pair;
}

Tensor forward_mlp_plain(const MlpSpec& spec, const MlpParams& p, const Tensor& x) {
  if (x.cols() != spec.input_width())
    throw DimensionError("model: input width " + x.shape_str() + " does not match encoder input " +
                         std::to_string(spec.input_width()));
  Tensor h = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = add_rowvec(matmul(h, p.weights[l]), p.biases[l]);
    const bool last = (l + 1 == p.weights.size());
    if (!last && spec.activation == Activation::kRelu) h = relu(h);
  }
  return h;
}

Tensor forward_student(const ParamPair& pair, const Tensor& x) {
  return forward_mlp_plain(pair.enc_spec, pair.student_enc, x);
}

Tensor forward_head(const ParamPair& pair, const Tensor& v) {
  return forward_mlp_plain(pair.head_spec.as_mlp(), pair.student_head, v);
}

Tensor forward_teacher(const ParamPair& pair, const Tensor& x) {
  return forward_mlp_plain(pair.enc_spec, pair.teacher_enc, x);
}

MlpTapeParams stage_params(Tape& tape, const MlpParams& p) {
  MlpTapeParams staged;
  for (const auto& w : p.weights) staged.weights.push_back(tape.input(w));
  for (const auto& b : p.biases) staged.biases.push_back(tape.input(b));
  return staged;
}

NodeId forward_mlp(Tape& tape, const MlpSpec& spec, const MlpTapeParams& p, NodeId x) {
  NodeId h = x;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = tape.add_rowvec(tape.matmul(h, p.weights[l]), p.biases[l]);
    const bool last = (l + 1 == p.weights.size());
    if (!last && spec.activation == Activation::kRelu) h = tape.relu(h);
  }
  return h;
}

void ema_update(ParamPair& pair, double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw ConfigError("model: momentum lambda must lie in [0, 1)");
  auto blend = [lambda](Tensor& t, const Tensor& s) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lambda * t[i] + (1.0 - lambda) * s[i];
  };
  for (std::size_t l = 0; l < pair.teacher_enc.weights.size(); ++l) {
    blend(pair.teacher_enc.weights[l], pair.student_enc.weights[l]);
    blend(pair.teacher_enc.biases[l], pair.student_enc.biases[l]);
  }
}

}  // namespace driftlab::model
