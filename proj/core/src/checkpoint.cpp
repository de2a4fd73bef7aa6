#include "driftlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "driftlab/tensor_io.hpp"

namespace driftlab::io {

namespace {
constexpr char kMagic[4] = {'R', 'C', 'P', 'K'};
constexpr std::uint16_t kVersion = 1;

using nlohmann::json;

void collect(const model::MlpParams& p, const std::string& prefix,
             std::vector<std::pair<std::string, const Tensor*>>& out) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.emplace_back(prefix + ".w" + std::to_string(l), &p.weights[l]);
    out.emplace_back(prefix + ".b" + std::to_string(l), &p.biases[l]);
  }
}
}  // namespace

void save_checkpoint(const std::string& path, const model::ParamPair& pair) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  collect(pair.student_enc, "student.enc", tensors);
  collect(pair.student_head, "student.head", tensors);
  collect(pair.teacher_enc, "teacher.enc", tensors);

  // Serialize blobs first so the manifest can carry exact offsets.
  std::ostringstream blobs(std::ios::binary);
  json manifest;
  manifest["version"] = kVersion;
  manifest["momentum"] = pair.momentum;
  manifest["encoder_widths"] = pair.enc_spec.layer_widths;
  manifest["activation"] = pair.enc_spec.activation == model::Activation::kRelu ? "relu" : "identity";
  manifest["head_embedding"] = pair.head_spec.embedding;
  manifest["head_hidden"] = pair.head_spec.hidden;
  json entries = json::array();
  for (const auto& [name, t] : tensors) {
    json e;
    e["name"] = name;
    e["shape"] = t->shape();
    e["offset"] = (std::uint64_t)blobs.tellp();
    entries.push_back(e);
    write_tensor(blobs, *t);
  }
  manifest["tensors"] = entries;

  const std::string mjson = manifest.dump();
  const std::string blob_str = blobs.str();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for write: " + path);
  os.write(kMagic, 4);
  std::uint16_t v = kVersion;
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
  std::uint64_t len = mjson.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(mjson.data(), (std::streamsize)mjson.size());
  os.write(blob_str.data(), (std::streamsize)blob_str.size());
  if (!os) throw IoError("checkpoint write failed: " + path);
}

model::ParamPair load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint for read: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);
  std::uint16_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!is || version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is) throw CheckpointError("checkpoint manifest truncated");
  std::string mjson(len, '\0');
  is.read(mjson.data(), (std::streamsize)len);
  if (!is) throw CheckpointError("checkpoint manifest truncated");

  json manifest;
  try {
    manifest = json::parse(mjson);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }

  model::ParamPair pair;
  pair.momentum = manifest.at("momentum").get<double>();
  pair.enc_spec.layer_widths = manifest.at("encoder_widths").get<std::vector<std::size_t>>();
  pair.enc_spec.activation = manifest.at("activation").get<std::string>() == "relu"
                                 ? model::Activation::kRelu
                                 : model::Activation::kIdentity;
  pair.head_spec.embedding = manifest.at("head_embedding").get<std::size_t>();
  pair.head_spec.hidden = manifest.at("head_hidden").get<std::size_t>();

  const std::streampos blob_base = is.tellg();
  auto read_at = [&](std::uint64_t offset) {
    is.clear();
    is.seekg(blob_base + (std::streamoff)offset);
    return read_tensor(is);
  };

  std::size_t enc_layers = pair.enc_spec.layer_widths.size() - 1;
  pair.student_enc.weights.resize(enc_layers);
  pair.student_enc.biases.resize(enc_layers);
  pair.teacher_enc.weights.resize(enc_layers);
  pair.teacher_enc.biases.resize(enc_layers);
  pair.student_head.weights.resize(2);
  pair.student_head.biases.resize(2);

  for (const auto& e : manifest.at("tensors")) {
    const std::string name = e.at("name").get<std::string>();
    Tensor t = read_at(e.at("offset").get<std::uint64_t>());
    auto parse_layer = [&](const std::string& tail) -> std::pair<char, std::size_t> {
      return {tail[0], (std::size_t)std::stoul(tail.substr(1))};
    };
    auto assign = [&](model::MlpParams& p, const std::string& tail) {
      auto [kind, l] = parse_layer(tail);
      if (l >= p.weights.size()) throw CheckpointError("checkpoint names unknown layer: " + name);
      (kind == 'w' ? p.weights : p.biases)[l] = std::move(t);
    };
    if (name.starts_with("student.enc.")) assign(pair.student_enc, name.substr(12));
    else if (name.starts_with("student.head.")) assign(pair.student_head, name.substr(13));
    else if (name.starts_with("teacher.enc.")) assign(pair.teacher_enc, name.substr(12));
    else throw CheckpointError("checkpoint names unknown tensor: " + name);
  }
  return pair;
}

}  // namespace driftlab::io
