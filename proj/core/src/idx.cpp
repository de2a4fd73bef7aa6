#include "driftlab/idx.hpp"

#include <fstream>

namespace driftlab::io {

namespace {
std::uint32_t read_be32(std::istream& is, std::uint64_t& offset) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("IDX file truncated", offset);
  offset += 4;
  return ((std::uint32_t)b[0] << 24) | ((std::uint32_t)b[1] << 16) |
         ((std::uint32_t)b[2] << 8) | (std::uint32_t)b[3];
}

std::ifstream open(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open IDX file: " + path);
  return is;
}
}  // namespace

Tensor load_idx_images(const std::string& path) {
  auto is = open(path);
  std::uint64_t offset = 0;
  std::uint32_t magic = read_be32(is, offset);
  if (magic != 0x00000803u)
    throw FormatError("bad IDX image magic " + std::to_string(magic), 0);
  std::uint32_t count = read_be32(is, offset);
  std::uint32_t rows = read_be32(is, offset);
  std::uint32_t cols = read_be32(is, offset);
  const std::size_t d = (std::size_t)rows * cols;
  Tensor out({count, d});
  std::vector<unsigned char> buf(d);
  for (std::uint32_t i = 0; i < count; ++i) {
    is.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)d);
    if (!is) throw FormatError("IDX image payload truncated", offset);
    offset += d;
    for (std::size_t k = 0; k < d; ++k) out.at(i, k) = buf[k] / 255.0;
  }
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  auto is = open(path);
  std::uint64_t offset = 0;
  std::uint32_t magic = read_be32(is, offset);
  if (magic != 0x00000801u)
    throw FormatError("bad IDX label magic " + std::to_string(magic), 0);
  std::uint32_t count = read_be32(is, offset);
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    char c;
    is.read(&c, 1);
    if (!is) throw FormatError("IDX label payload truncated", offset);
    offset += 1;
    labels[i] = (int)(unsigned char)c;
  }
  return labels;
}

std::pair<Tensor, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path) {
  Tensor images = load_idx_images(images_path);
  std::vector<int> labels = load_idx_labels(labels_path);
  if (images.rows() != labels.size())
    throw FormatError("IDX image/label count mismatch: " + std::to_string(images.rows()) +
                          " vs " + std::to_string(labels.size()),
                      4);
  return {std::move(images), std::move(labels)};
}

}  // namespace driftlab::io
