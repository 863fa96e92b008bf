#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoid/tokenizer.hpp"

namespace emoid::model {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)), data(numel(shape), 0.0f) {}

  static std::size_t numel(const std::vector<std::int64_t>& shape);
  std::size_t size() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

using TensorMap = std::map<std::string, Tensor>;

struct Provenance {
  std::string stage;        // "init", "pretrain", "probe", "finetune", "soup"
  std::string config_hash;
  std::vector<std::string> parents;  // content hashes of parent checkpoints
  std::string code_version;

  bool operator==(const Provenance&) const = default;
};

/// Named float32 tensors plus everything needed to run them: encoder
/// hyperparameters and the fitted vocabulary.
struct ModelCheckpoint {
  TensorMap tensors;
  Provenance provenance;
  nlohmann::json encoder;  // serialized EncoderConfig
  WordTokenizer tokenizer;

  /// SHA-256 over tensor names, shapes and bytes.
  std::string content_hash() const;
  bool operator==(const ModelCheckpoint& o) const {
    return tensors == o.tensors && provenance == o.provenance && encoder == o.encoder && tokenizer == o.tokenizer;
  }
};

/// Writes `manifest.json`, `vocab.txt` and one little-endian `.bin` blob per
/// tensor into `dir` (created if needed).
void save_checkpoint(const std::string& dir, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& dir);

/// Elementwise mean of two checkpoints with identical manifests. Throws
/// naming the first tensor whose name, shape or presence differs.
ModelCheckpoint average_weights(const ModelCheckpoint& a, const ModelCheckpoint& b);

}  // namespace emoid::model
