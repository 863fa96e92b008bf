#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "emoid/checkpoint.hpp"
#include "emoid/common.hpp"
#include "emoid/kernels/layout.hpp"
#include "emoid/kernels/parallel.hpp"
#include "emoid/rng.hpp"
#include "emoid/tokenizer.hpp"

namespace emoid::model {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 128;
  std::size_t heads = 4;
  std::size_t ff = 256;
  std::size_t vocab = 8000;
  std::size_t max_len = 128;
  float emb_dropout = 0.1f;
  float init_std = 0.02f;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  bool operator==(const EncoderConfig&) const = default;
};

inline constexpr std::size_t kHeadOutputs = kNumLabels;

/// Sequences packed back to back, no padding.
struct Batch {
  std::vector<TokenId> ids;
  std::vector<std::int32_t> positions;
  kernels::SeqLayout layout;

  static Batch pack(std::span<const std::vector<TokenId>> sequences, std::size_t heads);
  std::size_t tokens() const { return ids.size(); }
  std::size_t sequences() const { return layout.sequences(); }
};

struct LayerActs {
  std::vector<float> ln1, ln1_mean, ln1_rstd, qkv, att, atty, attproj, res1;
  std::vector<float> ln2, ln2_mean, ln2_rstd, up, act, down, res2;
};

struct Activations {
  std::vector<float> embed;         // token + position embedding
  std::vector<float> dropout_mask;  // scale factors, empty when not training
  std::vector<float> x0;            // embedding after dropout
  std::vector<LayerActs> layers;
  std::vector<float> lnf_mean, lnf_rstd;
  std::vector<float> hidden;        // final layer-normed states [tokens, hidden]
};

/// enc.* tensors drawn from N(0, init_std); layer-norm gains 1, biases 0.
TensorMap init_encoder(const EncoderConfig& cfg, std::uint64_t seed);
/// mlm.w [vocab, hidden], mlm.b [vocab].
TensorMap init_mlm_head(const EncoderConfig& cfg, std::uint64_t seed);
/// head.w [5, hidden], head.b [5].
TensorMap init_classifier_head(const EncoderConfig& cfg, std::uint64_t seed);

bool is_encoder_tensor(const std::string& name);
bool is_head_tensor(const std::string& name);
bool is_mlm_tensor(const std::string& name);

/// Zero-filled tensors with the same names and shapes.
TensorMap zeros_like(const TensorMap& params);

class Encoder {
 public:
  explicit Encoder(EncoderConfig cfg, kernels::Backend backend = kernels::Backend::Parallel);

  const EncoderConfig& config() const { return cfg_; }
  void set_backend(kernels::Backend b) { backend_ = b; }

  /// `rng` non-null enables embedding dropout (training mode).
  void forward(const TensorMap& params, const Batch& batch, Activations& acts, Rng* rng) const;

  /// Accumulates parameter gradients for the enc.* tensors given
  /// dL/d(hidden). `d_hidden` is consumed as scratch.
  void backward(const TensorMap& params, const Batch& batch, const Activations& acts, std::vector<float>& d_hidden,
                TensorMap& grads) const;

  /// Pooled `<s>` rows of `acts.hidden`, [sequences, hidden].
  std::vector<float> pooled(const Batch& batch, const Activations& acts) const;

  struct MlmResult {
    double loss = 0.0;  // mean over predicted positions
    std::size_t predicted = 0;
    std::size_t correct = 0;
  };
  /// Masked-LM loss over rows with targets != ignore. When `grads` is
  /// non-null, fills mlm.* gradients and adds dL/d(hidden) into `d_hidden`.
  MlmResult mlm_loss(const TensorMap& params, const Activations& acts, std::span<const TokenId> targets,
                     TokenId ignore_index, TensorMap* grads, std::vector<float>* d_hidden) const;

 private:
  template <class K>
  void forward_impl(const TensorMap& params, const Batch& batch, Activations& acts, Rng* rng) const;
  template <class K>
  void backward_impl(const TensorMap& params, const Batch& batch, const Activations& acts,
                     std::vector<float>& d_hidden, TensorMap& grads) const;
  template <class K>
  MlmResult mlm_impl(const TensorMap& params, const Activations& acts, std::span<const TokenId> targets,
                     TokenId ignore_index, TensorMap* grads, std::vector<float>* d_hidden) const;

  EncoderConfig cfg_;
  kernels::Backend backend_;
};

}  // namespace emoid::model
