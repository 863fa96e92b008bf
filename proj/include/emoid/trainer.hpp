#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoid/checkpoint.hpp"
#include "emoid/common.hpp"
#include "emoid/emlm.hpp"
#include "emoid/encoder.hpp"
#include "emoid/losses.hpp"

namespace emoid::model {

struct TrainConfig {
  struct Pretrain {
    double lr = 5e-5;
    std::size_t batch = 128;
    std::size_t steps = 5000;  // desk scale; the full recipe runs 100K
    double weight_decay = 0.01;
  } pretrain;
  struct Probe {
    double lr = 5e-4;
    std::size_t steps = 1000;
    std::size_t batch = 256;
  } probe;
  struct Finetune {
    double lr = 1e-5;  // constant schedule
    double weight_decay = 0.01;
    double label_smoothing = 0.1;
    std::size_t epochs = 5;
    std::size_t effective_batch = 256;
    std::size_t micro_batch = 256;
  } finetune;
  struct Contrastive {
    double weight = 0.9;       // lambda
    double temperature = 0.3;  // tau
  } contrastive;
  struct Optimizer {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double max_grad_norm = 1.0;  // 0 disables clipping
  } optimizer;
  std::size_t log_every = 50;
  std::uint64_t seed = 1234;

  void validate() const;
  nlohmann::json to_json() const;
  /// Only the settings that stage ("pretrain", "probe", "finetune") reads;
  /// used for cache keys and provenance so unrelated edits keep results.
  nlohmann::json stage_json(std::string_view stage) const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LabeledData {
  std::vector<std::string> texts;
  std::vector<EmotionLabel> labels;

  std::size_t size() const { return texts.size(); }
};

struct LogEntry {
  std::string stage;
  std::size_t step = 0;
  double loss = 0.0;
  double metric = 0.0;  // stage-specific: dev macro-F1 for fine-tuning, 0 otherwise
};
using TrainLog = std::vector<LogEntry>;

struct DivergenceError : Error {
  DivergenceError(const std::string& stage, std::size_t step)
      : Error(stage + " diverged (non-finite loss) at step " + std::to_string(step)), step(step) {}
  std::size_t step;
};

/// Decoupled-weight-decay Adam over a named tensor map. Weight decay is
/// applied to matrices only; vectors (biases, layer-norm) are not decayed.
class AdamW {
 public:
  explicit AdamW(TrainConfig::Optimizer cfg) : cfg_(cfg) {}
  void step(TensorMap& params, TensorMap& grads, double lr, double weight_decay,
            const std::function<bool(const std::string&)>& trainable);
  std::int64_t steps() const { return t_; }

 private:
  TrainConfig::Optimizer cfg_;
  TensorMap m_, v_;
  std::int64_t t_ = 0;
};

/// Global-norm gradient clipping over the selected tensors; returns the pre-clip norm.
double clip_grad_norm(TensorMap& grads, double max_norm, const std::function<bool(const std::string&)>& selected);

/// Masked-LM pre-training. With `init`, continues from its encoder, MLM head
/// and vocabulary; otherwise fits a vocabulary on `corpus` and starts from a
/// seeded initialization.
ModelCheckpoint pretrain_mlm(std::span<const std::string> corpus, const EncoderConfig& encoder_cfg,
                             const TrainConfig& cfg, const emlm::MaskingConfig& masking,
                             const std::set<std::string>& emotion_words, const ModelCheckpoint* init = nullptr,
                             TrainLog* log = nullptr);

/// Seeded fresh model (encoder + MLM head) with a vocabulary fitted on `corpus`.
ModelCheckpoint initial_checkpoint(std::span<const std::string> corpus, const EncoderConfig& encoder_cfg,
                                   std::uint64_t seed);

struct MlmEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t predicted = 0;
};
MlmEval evaluate_mlm(const ModelCheckpoint& ckpt, std::span<const std::string> texts, const emlm::MaskingConfig& masking,
                     const std::set<std::string>& emotion_words);

/// Pooled `<s>` features of `texts` under the checkpoint's encoder, eval mode.
std::vector<float> pooled_features(const ModelCheckpoint& ckpt, std::span<const std::string> texts);

/// Trains a freshly initialized classifier head on frozen encoder features.
/// Encoder tensors are copied bit-for-bit; MLM tensors are dropped.
ModelCheckpoint linear_probe(const ModelCheckpoint& base, const LabeledData& data, const TrainConfig& cfg,
                             TrainLog* log = nullptr);

/// Full fine-tuning with the joint contrastive + smoothed-CE objective.
/// `dev` (optional) is scored with macro-F1 after every epoch.
ModelCheckpoint fine_tune(const ModelCheckpoint& probed, const LabeledData& train, const LabeledData* dev,
                          const TrainConfig& cfg, TrainLog* log = nullptr);

struct Prediction {
  std::array<double, kNumLabels> probs{};
  EmotionLabel label = EmotionLabel::Sadness;
  bool degenerate = false;  // empty input, uniform output
};

/// Read-only inference wrapper; safe to share across threads.
class Classifier {
 public:
  explicit Classifier(ModelCheckpoint ckpt);
  std::vector<Prediction> predict(std::span<const std::string> texts) const;
  Prediction predict_one(std::string_view text) const;
  const ModelCheckpoint& checkpoint() const { return ckpt_; }

 private:
  ModelCheckpoint ckpt_;
  EncoderConfig cfg_;
};

std::vector<Prediction> predict(const ModelCheckpoint& ckpt, std::span<const std::string> texts);

/// Argmax with ties resolved toward the earlier label in the fixed order.
EmotionLabel argmax_label(const std::array<double, kNumLabels>& scores);

}  // namespace emoid::model
