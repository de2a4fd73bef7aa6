#include "driftlab/optimizer.hpp"

#include <cmath>

namespace driftlab::rcp {

void OptimConfig::validate() const {
  if (base_lr < 0.0) throw ConfigError("optim: base_lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("optim: betas must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("optim: weight_decay must be >= 0");
  if (total_steps < 1) throw ConfigError("optim: total_steps must be >= 1");
  if (warmup_steps > total_steps) throw ConfigError("optim: warmup_steps exceeds total_steps");
}

double OptimConfig::lr_at(std::uint64_t step) const {
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * (double)(step + 1) / (double)warmup_steps;
  const std::uint64_t tail = total_steps - warmup_steps;
  if (tail == 0) return base_lr;
  const double progress = (double)(step - warmup_steps) / (double)tail;
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void AdamW::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                 const std::vector<bool>& decay) {
  if (params.size() != grads.size() || params.size() != decay.size())
    throw ContractError("optim: param/grad/decay list lengths disagree");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  const double lr = cfg_.lr_at(t_);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
  constexpr double kEps = 1e-8;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const double wd = decay[i] ? cfg_.weight_decay : 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * (mhat / (std::sqrt(vhat) + kEps) + wd * p[k]);
    }
  }
}

}  // namespace driftlab::rcp
