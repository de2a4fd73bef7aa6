#include "driftlab/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace driftlab::io {

namespace {
constexpr char kMagic[4] = {'R', 'C', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, std::uint64_t& offset) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("tensor file truncated", offset);
  offset += sizeof(T);
  return v;
}
}  // namespace

FormatError::FormatError(const std::string& msg, std::uint64_t off)
    : std::runtime_error(msg + " (byte offset " + std::to_string(off) + ")"), offset(off) {}

void write_tensor(std::ostream& os, const Tensor& t, Dtype dtype) {
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.ndim()));
  for (auto d : t.shape()) put<std::uint64_t>(os, d);
  if (dtype == Dtype::kF64) {
    os.write(reinterpret_cast<const char*>(t.data()),
             (std::streamsize)(t.size() * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) put<float>(os, (float)t[i]);
  }
  if (!os) throw IoError("tensor write failed");
}

Tensor read_tensor(std::istream& is) {
  std::uint64_t offset = 0;
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad tensor magic", 0);
  offset = 4;
  auto version = get<std::uint16_t>(is, offset);
  if (version != kVersion)
    throw FormatError("unsupported tensor version " + std::to_string(version), 4);
  auto dtype = get<std::uint8_t>(is, offset);
  if (dtype > 1) throw FormatError("unknown dtype tag", offset - 1);
  auto ndim = get<std::uint8_t>(is, offset);
  std::vector<std::size_t> shape(ndim);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = (std::size_t)get<std::uint64_t>(is, offset);
    count *= d;
  }
  Tensor t(shape);
  if (dtype == 1) {
    is.read(reinterpret_cast<char*>(t.data()), (std::streamsize)(count * sizeof(double)));
    if (!is) throw FormatError("tensor payload truncated", offset);
  } else {
    for (std::size_t i = 0; i < count; ++i) t[i] = (double)get<float>(is, offset);
  }
  return t;
}

void save_tensor(const std::string& path, const Tensor& t, Dtype dtype) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  write_tensor(os, t, dtype);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  return read_tensor(is);
}

}  // namespace driftlab::io
