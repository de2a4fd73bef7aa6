#pragma once

#include <string>

#include "driftlab/model.hpp"

namespace driftlab::io {

/// Bad magic, wrong version, or inconsistent manifest in a checkpoint file.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint layout: "RCPK" | u16 version=1 | u64 manifest_len | JSON manifest
// | concatenated tensor-file records. The manifest lists (name, offset) per
// tensor plus the architecture needed to rebuild the ParamPair.

void save_checkpoint(const std::string& path, const model::ParamPair& pair);
model::ParamPair load_checkpoint(const std::string& path);

}  // namespace driftlab::io
