#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "driftlab/tensor.hpp"

namespace driftlab::io {

/// Malformed file contents; carries the byte offset of the first bad byte.
struct FormatError : std::runtime_error {
  FormatError(const std::string& msg, std::uint64_t offset);
  std::uint64_t offset = 0;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Dtype : std::uint8_t { kF32 = 0, kF64 = 1 };

// Tensor file layout (all little-endian after the magic):
//   "RCPT" | u16 version=1 | u8 dtype (0=f32, 1=f64) | u8 ndim
//   | ndim x u64 dims | payload row-major.
// f32 storage exists for export only; tensors are f64 internally.

void save_tensor(const std::string& path, const Tensor& t, Dtype dtype = Dtype::kF64);
Tensor load_tensor(const std::string& path);

void write_tensor(std::ostream& os, const Tensor& t, Dtype dtype = Dtype::kF64);
Tensor read_tensor(std::istream& is);

}  // namespace driftlab::io
