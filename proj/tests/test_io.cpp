#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "driftlab/checkpoint.hpp"
#include "driftlab/idx.hpp"
#include "driftlab/model.hpp"
#include "driftlab/rng.hpp"
#include "driftlab/tensor_io.hpp"

using namespace driftlab;
namespace fs = std::filesystem;

namespace {
fs::path tmpfile(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "driftlab_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), (std::streamsize)bytes.size());
}

void push_u32_be(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back((unsigned char)(x >> 24));
  v.push_back((unsigned char)(x >> 16));
  v.push_back((unsigned char)(x >> 8));
  v.push_back((unsigned char)x);
}
}  // namespace

TEST_CASE("tensor file round-trips bitwise") {
  Rng rng(1);
  Tensor t({3, 5});
  for (double& v : t.vec()) v = rng.gaussian();
  auto p = tmpfile("roundtrip.rcpt");
  io::save_tensor(p.string(), t);
  Tensor back = io::load_tensor(p.string());
  REQUIRE(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
}

TEST_CASE("empty tensor round-trips") {
  Tensor t({0, 0});
  auto p = tmpfile("empty.rcpt");
  io::save_tensor(p.string(), t);
  Tensor back = io::load_tensor(p.string());
  CHECK(back.shape() == t.shape());
  CHECK(back.size() == 0);
}

TEST_CASE("tensor file rejects a wrong magic") {
  auto p = tmpfile("badmagic.rcpt");
  write_bytes(p, {'N', 'O', 'P', 'E', 1, 0, 1, 2});
  CHECK_THROWS_AS(io::load_tensor(p.string()), io::FormatError);
}

TEST_CASE("tensor file byte layout matches the documented format") {
  Tensor t = Tensor::matrix(1, 2, {1.0, 2.0});
  auto p = tmpfile("layout.rcpt");
  io::save_tensor(p.string(), t, io::Dtype::kF64);
  std::ifstream is(p, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  // "RCPT" | u16 version=1 LE | u8 dtype=1 | u8 ndim=2 | dims 1,2 u64 LE | payload
  REQUIRE(bytes.size() == 4 + 2 + 1 + 1 + 16 + 16);
  CHECK(bytes[0] == 'R');
  CHECK(bytes[1] == 'C');
  CHECK(bytes[2] == 'P');
  CHECK(bytes[3] == 'T');
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 1);  // f64
  CHECK(bytes[7] == 2);  // ndim
  CHECK(bytes[8] == 1);  // dim0 = 1
  CHECK(bytes[16] == 2); // dim1 = 2
  double payload[2];
  std::memcpy(payload, bytes.data() + 24, 16);
  CHECK(payload[0] == 1.0);
  CHECK(payload[1] == 2.0);
}

TEST_CASE("f32 export quantizes but round-trips") {
  Tensor t = Tensor::row({0.5, 1.0 / 3.0});
  auto p = tmpfile("f32.rcpt");
  io::save_tensor(p.string(), t, io::Dtype::kF32);
  Tensor back = io::load_tensor(p.string());
  CHECK(back[0] == 0.5);
  CHECK(back[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("idx fixture parses exactly") {
  // 4 images of 2x2, pixel value = 16*i + j for image i, flat index j.
  std::vector<unsigned char> img;
  push_u32_be(img, 0x00000803);
  push_u32_be(img, 4);
  push_u32_be(img, 2);
  push_u32_be(img, 2);
  for (unsigned i = 0; i < 4; ++i)
    for (unsigned j = 0; j < 4; ++j) img.push_back((unsigned char)(16 * i + j));
  auto pi = tmpfile("fixture-images.idx");
  write_bytes(pi, img);

  std::vector<unsigned char> lab;
  push_u32_be(lab, 0x00000801);
  push_u32_be(lab, 4);
  for (unsigned char c : {3, 1, 0, 2}) lab.push_back(c);
  auto pl = tmpfile("fixture-labels.idx");
  write_bytes(pl, lab);

  auto [features, labels] = io::load_idx(pi.string(), pl.string());
  REQUIRE(features.rows() == 4);
  REQUIRE(features.cols() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(features.at(i, j) == doctest::Approx((16.0 * (double)i + (double)j) / 255.0));
  CHECK(labels == std::vector<int>{3, 1, 0, 2});
}

TEST_CASE("idx count mismatch is a format error") {
  std::vector<unsigned char> img;
  push_u32_be(img, 0x00000803);
  push_u32_be(img, 2);
  push_u32_be(img, 1);
  push_u32_be(img, 1);
  img.push_back(0);
  img.push_back(1);
  auto pi = tmpfile("mismatch-images.idx");
  write_bytes(pi, img);

  std::vector<unsigned char> lab;
  push_u32_be(lab, 0x00000801);
  push_u32_be(lab, 3);
  lab.push_back(0);
  lab.push_back(1);
  lab.push_back(2);
  auto pl = tmpfile("mismatch-labels.idx");
  write_bytes(pl, lab);

  CHECK_THROWS_AS(io::load_idx(pi.string(), pl.string()), io::FormatError);
}

TEST_CASE("empty idx file errors at offset 0") {
  auto p = tmpfile("empty.idx");
  write_bytes(p, {});
  try {
    io::load_idx_images(p.string());
    FAIL("expected a format error");
  } catch (const io::FormatError& e) {
    CHECK(e.offset == 0);
  }
}

TEST_CASE("truncated idx payload is a format error") {
  std::vector<unsigned char> img;
  push_u32_be(img, 0x00000803);
  push_u32_be(img, 2);
  push_u32_be(img, 2);
  push_u32_be(img, 2);
  img.push_back(7);  // 1 byte instead of 8
  auto p = tmpfile("truncated.idx");
  write_bytes(p, img);
  CHECK_THROWS_AS(io::load_idx_images(p.string()), io::FormatError);
}

TEST_CASE("checkpoint round-trips bitwise") {
  model::MlpSpec enc{{6, 8, 4}};
  model::HeadSpec head{4, 5};
  model::ParamPair pair = model::init_params(enc, head, Rng(21));
  auto p = tmpfile("pair.rcpk");
  io::save_checkpoint(p.string(), pair);
  model::ParamPair back = io::load_checkpoint(p.string());

  REQUIRE(back.enc_spec.layer_widths == pair.enc_spec.layer_widths);
  CHECK(back.head_spec.embedding == pair.head_spec.embedding);
  CHECK(back.head_spec.hidden == pair.head_spec.hidden);
  CHECK(back.momentum == pair.momentum);
  auto same = [](const model::MlpParams& a, const model::MlpParams& b) {
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
      REQUIRE(a.weights[i].shape() == b.weights[i].shape());
      for (std::size_t j = 0; j < a.weights[i].size(); ++j)
        CHECK(a.weights[i][j] == b.weights[i][j]);
      for (std::size_t j = 0; j < a.biases[i].size(); ++j)
        CHECK(a.biases[i][j] == b.biases[i][j]);
    }
  };
  same(back.student_enc, pair.student_enc);
  same(back.student_head, pair.student_head);
  same(back.teacher_enc, pair.teacher_enc);
}

TEST_CASE("tampered checkpoint magic is rejected") {
  model::ParamPair pair = model::init_params(model::MlpSpec{{3, 2}}, model::HeadSpec{2, 2}, Rng(2));
  auto p = tmpfile("tampered.rcpk");
  io::save_checkpoint(p.string(), pair);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  CHECK_THROWS_AS(io::load_checkpoint(p.string()), io::CheckpointError);
}
