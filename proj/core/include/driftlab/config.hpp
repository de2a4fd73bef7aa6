#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "driftlab/tensor.hpp"

namespace driftlab::cli {

/// Bad key, bad value, or missing required key; carries the offending
/// `section.key` path in the message.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full run description parsed from the sectioned key-value config format.
/// Unknown keys are a hard error. Every run derives a content hash from the
/// canonicalized, fully-resolved key set.
struct RunConfig {
  // global
  std::uint64_t seed = 0;

  // [stream]
  std::string stream_kind = "stationary";  // stationary | tailed | sudden | gradual
  std::size_t classes = 10;
  std::size_t dim = 32;
  double sigma = 0.25;
  double radius = 3.0;
  std::size_t ood_classes = 3;
  double imbalance_ratio = 100.0;
  std::uint64_t ramp_steps = 0;  // 0 = default to steps / 4
  std::uint64_t switch_step = 0;
  std::string transform = "negate";  // identity | negate | shift
  std::vector<double> shift;
  std::uint64_t grad_start = 0;
  std::uint64_t grad_end = 0;  // 0 = default to steps
  double noise_sigma = 0.1;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double mask_prob = 0.1;

  // [model]
  std::vector<std::size_t> encoder = {64, 16};  // hidden... + embedding; input = dim
  std::size_t head_hidden = 16;
  double momentum = 0.999;

  // [rcp]
  std::size_t window_size = 0;  // required
  double temperature = 0.2;
  bool qk_scale = false;
  bool intervention = true;
  std::vector<std::size_t> ablate_windows;
  std::size_t ablate_seeds = 5;

  // [optim]
  double base_lr = 1.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.05;
  double warmup_frac = 0.05;
  std::uint64_t steps = 1000;

  // [eval]
  std::size_t many_min = 100;
  std::size_t few_max = 20;
  std::size_t probe_train = 2000;
  std::size_t probe_test_per_class = 50;
  std::size_t ood_samples = 500;
  double probe_lr = 0.5;
  std::size_t probe_epochs = 300;

  // [io]
  std::string out_dir = "runs";
  std::string checkpoint;  // for the eval subcommand
  std::uint64_t checkpoint_every = 0;

  void validate() const;
  /// Canonicalized full key set -> 16-hex-digit content hash. Key order and
  /// whitespace in the source file cannot affect it.
  std::string content_hash() const;
  /// Canonical `section.key=value` lines, sorted.
  std::vector<std::string> canonical_lines() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace driftlab::cli
