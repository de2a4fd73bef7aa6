#pragma once

#include <string>
#include <vector>

#include "driftlab/tensor.hpp"
#include "driftlab/tensor_io.hpp"

namespace driftlab::io {

// MNIST-style IDX ingestion: big-endian magic and dims, u8 payload.
// 0x00000803 = 3-D u8 image file, 0x00000801 = 1-D u8 label file.

/// Pixels scaled to [0,1], dims flattened row-major to d = rows*cols.
Tensor load_idx_images(const std::string& path);

std::vector<int> load_idx_labels(const std::string& path);

/// Loads both files and checks their counts agree.
std::pair<Tensor, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path);

}  // namespace driftlab::io
