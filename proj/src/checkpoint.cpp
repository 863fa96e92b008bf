#include "emoid/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include "emoid/common.hpp"
#include "emoid/hash.hpp"
#include "emoid/jsonl.hpp"

namespace emoid::model {

namespace fs = std::filesystem;
using jsonl::Json;

static_assert(std::endian::native == std::endian::little, "tensor blobs are stored little-endian");

std::size_t Tensor::numel(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw Error("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string ModelCheckpoint::content_hash() const {
  Sha256 h;
  for (const auto& [name, t] : tensors) {
    h.update(name).update("|");
    for (auto d : t.shape) h.update(std::to_string(d)).update(",");
    h.update("|");
    h.update(std::as_bytes(std::span(t.data)));
  }
  return h.hex();
}

namespace {

std::string blob_name(const std::string& tensor) { return tensor + ".bin"; }

}  // namespace

void save_checkpoint(const std::string& dir, const ModelCheckpoint& ckpt) {
  fs::create_directories(dir);
  Json tensors = Json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    if (Tensor::numel(t.shape) != t.data.size()) throw Error("tensor '" + name + "' data does not match its shape");
    const auto path = fs::path(dir) / blob_name(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"dtype", "f32"}, {"file", blob_name(name)}});
  }
  Json manifest;
  manifest["format"] = "emoid-checkpoint-v1";
  manifest["tensors"] = tensors;
  manifest["encoder"] = ckpt.encoder;
  manifest["provenance"] = {{"stage", ckpt.provenance.stage},
                            {"config_hash", ckpt.provenance.config_hash},
                            {"parents", ckpt.provenance.parents},
                            {"code_version", ckpt.provenance.code_version},
                            {"content_hash", ckpt.content_hash()}};
  ckpt.tokenizer.save((fs::path(dir) / "vocab.txt").string());
  jsonl::write_json((fs::path(dir) / "manifest.json").string(), manifest);
}

ModelCheckpoint load_checkpoint(const std::string& dir) {
  const Json manifest = jsonl::read_json((fs::path(dir) / "manifest.json").string());
  if (manifest.value("format", "") != "emoid-checkpoint-v1") throw Error(dir + ": not a checkpoint directory");
  ModelCheckpoint ckpt;
  for (const auto& entry : manifest.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    if (entry.at("dtype").get<std::string>() != "f32") throw Error(dir + ": tensor '" + name + "' has unsupported dtype");
    Tensor t(entry.at("shape").get<std::vector<std::int64_t>>());
    const auto path = fs::path(dir) / entry.at("file").get<std::string>();
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != t.data.size() * sizeof(float))
      throw Error(path.string() + ": blob size does not match manifest shape");
    in.seekg(0);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(bytes));
    ckpt.tensors.emplace(name, std::move(t));
  }
  ckpt.encoder = manifest.at("encoder");
  const auto& prov = manifest.at("provenance");
  ckpt.provenance = {prov.at("stage").get<std::string>(), prov.at("config_hash").get<std::string>(),
                     prov.at("parents").get<std::vector<std::string>>(), prov.at("code_version").get<std::string>()};
  ckpt.tokenizer = WordTokenizer::load((fs::path(dir) / "vocab.txt").string());
  if (prov.contains("content_hash") && prov["content_hash"].get<std::string>() != ckpt.content_hash())
    throw Error(dir + ": tensor contents do not match the recorded hash");
  return ckpt;
}

ModelCheckpoint average_weights(const ModelCheckpoint& a, const ModelCheckpoint& b) {
  auto ia = a.tensors.begin();
  auto ib = b.tensors.begin();
  for (; ia != a.tensors.end() || ib != b.tensors.end(); ++ia, ++ib) {
    if (ia == a.tensors.end()) throw Error("manifest mismatch at tensor '" + ib->first + "': missing in first checkpoint");
    if (ib == b.tensors.end()) throw Error("manifest mismatch at tensor '" + ia->first + "': missing in second checkpoint");
    if (ia->first != ib->first) throw Error("manifest mismatch at tensor '" + std::min(ia->first, ib->first) + "': names differ");
    if (ia->second.shape != ib->second.shape) throw Error("manifest mismatch at tensor '" + ia->first + "': shapes differ");
  }
  if (a.encoder != b.encoder) throw Error("checkpoints have different encoder configurations");
  if (!(a.tokenizer == b.tokenizer)) throw Error("checkpoints have different vocabularies");

  ModelCheckpoint out;
  out.encoder = a.encoder;
  out.tokenizer = a.tokenizer;
  for (const auto& [name, ta] : a.tensors) {
    const Tensor& tb = b.tensors.at(name);
    Tensor t(ta.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = (ta.data[i] + tb.data[i]) * 0.5f;
    out.tensors.emplace(name, std::move(t));
  }
  out.provenance = {"soup", a.provenance.config_hash, {a.content_hash(), b.content_hash()}, std::string(code_version())};
  return out;
}

}  // namespace emoid::model
