#pragma once

#include <cstdint>
#include <vector>

#include "driftlab/tensor.hpp"

namespace driftlab::rcp {

struct ConfigError : ContractError {
  using ContractError::ContractError;
};

/// Adam-style schedule: linear warmup from 0 to base_lr, then cosine decay.
struct OptimConfig {
  double base_lr = 1.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.05;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;

  void validate() const;
  double lr_at(std::uint64_t step) const;
};

/// Decoupled-weight-decay adaptive-moment optimizer over a flat tensor list.
/// Decay applies to entries flagged in `decay` (weights, not biases).
class AdamW {
 public:
  explicit AdamW(OptimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
            const std::vector<bool>& decay);

  std::uint64_t steps_taken() const { return t_; }
  double current_lr() const { return cfg_.lr_at(t_ == 0 ? 0 : t_ - 1); }
  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace driftlab::rcp
