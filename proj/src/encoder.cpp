#include "emoid/encoder.hpp"

#include <algorithm>
#include <string>

#include "emoid/common.hpp"
#include "emoid/kernels/serial.hpp"

namespace emoid::model {

using kernels::Backend;

void EncoderConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || ff == 0) throw Error("encoder dimensions must be positive");
  if (hidden % heads != 0) throw Error("hidden size must be divisible by the number of heads");
  if (vocab <= static_cast<std::size_t>(special::kCount)) throw Error("vocab must exceed the special tokens");
  if (max_len < 2) throw Error("max_len must be at least 2");
  if (!(emb_dropout >= 0.0f && emb_dropout < 1.0f)) throw Error("embedding dropout must lie in [0,1)");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"layers", layers}, {"hidden", hidden}, {"heads", heads},         {"ff", ff},
          {"vocab", vocab},   {"max_len", max_len}, {"emb_dropout", emb_dropout}, {"init_std", init_std}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ff = j.at("ff").get<std::size_t>();
  c.vocab = j.at("vocab").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.emb_dropout = j.at("emb_dropout").get<float>();
  c.init_std = j.at("init_std").get<float>();
  c.validate();
  return c;
}

Batch Batch::pack(std::span<const std::vector<TokenId>> sequences, std::size_t heads) {
  Batch b;
  std::vector<std::size_t> lengths;
  for (const auto& s : sequences) {
    if (s.empty()) throw Error("cannot pack an empty sequence");
    lengths.push_back(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      b.ids.push_back(s[i]);
      b.positions.push_back(static_cast<std::int32_t>(i));
    }
  }
  b.layout = kernels::SeqLayout(lengths, heads);
  return b;
}

namespace {

std::string layer_prefix(std::size_t l) { return "enc.l" + std::to_string(l) + "."; }

void fill_normal(Tensor& t, Rng& rng, float std) {
  for (auto& x : t.data) x = static_cast<float>(rng.normal(0.0, std));
}

Tensor ones(std::vector<std::int64_t> shape) {
  Tensor t(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), 1.0f);
  return t;
}

std::span<const float> P(const TensorMap& m, const std::string& name) {
  const auto it = m.find(name);
  if (it == m.end()) throw Error("missing tensor '" + name + "'");
  return it->second.data;
}

std::span<float> G(TensorMap& m, const std::string& name) {
  const auto it = m.find(name);
  if (it == m.end()) throw Error("missing gradient '" + name + "'");
  return it->second.data;
}

template <class T>
std::span<const T> C(const std::vector<T>& v) { return v; }

}  // namespace

TensorMap init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto H = static_cast<std::int64_t>(cfg.hidden), F = static_cast<std::int64_t>(cfg.ff);
  TensorMap m;
  auto normal = [&](const std::string& name, std::vector<std::int64_t> shape) {
    Tensor t(std::move(shape));
    fill_normal(t, rng, cfg.init_std);
    m.emplace(name, std::move(t));
  };
  normal("enc.tok_emb", {static_cast<std::int64_t>(cfg.vocab), H});
  normal("enc.pos_emb", {static_cast<std::int64_t>(cfg.max_len), H});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto p = layer_prefix(l);
    m.emplace(p + "ln1.g", ones({H}));
    m.emplace(p + "ln1.b", Tensor({H}));
    normal(p + "attn.qkv.w", {3 * H, H});
    m.emplace(p + "attn.qkv.b", Tensor({3 * H}));
    normal(p + "attn.out.w", {H, H});
    m.emplace(p + "attn.out.b", Tensor({H}));
    m.emplace(p + "ln2.g", ones({H}));
    m.emplace(p + "ln2.b", Tensor({H}));
    normal(p + "ffn.up.w", {F, H});
    m.emplace(p + "ffn.up.b", Tensor({F}));
    normal(p + "ffn.down.w", {H, F});
    m.emplace(p + "ffn.down.b", Tensor({H}));
  }
  m.emplace("enc.ln_f.g", ones({H}));
  m.emplace("enc.ln_f.b", Tensor({H}));
  return m;
}

TensorMap init_mlm_head(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  TensorMap m;
  Tensor w({static_cast<std::int64_t>(cfg.vocab), static_cast<std::int64_t>(cfg.hidden)});
  fill_normal(w, rng, cfg.init_std);
  m.emplace("mlm.w", std::move(w));
  m.emplace("mlm.b", Tensor({static_cast<std::int64_t>(cfg.vocab)}));
  return m;
}

TensorMap init_classifier_head(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  TensorMap m;
  Tensor w({static_cast<std::int64_t>(kHeadOutputs), static_cast<std::int64_t>(cfg.hidden)});
  fill_normal(w, rng, cfg.init_std);
  m.emplace("head.w", std::move(w));
  m.emplace("head.b", Tensor({static_cast<std::int64_t>(kHeadOutputs)}));
  return m;
}

bool is_encoder_tensor(const std::string& name) { return name.rfind("enc.", 0) == 0; }
bool is_head_tensor(const std::string& name) { return name.rfind("head.", 0) == 0; }
bool is_mlm_tensor(const std::string& name) { return name.rfind("mlm.", 0) == 0; }

TensorMap zeros_like(const TensorMap& params) {
  TensorMap g;
  for (const auto& [name, t] : params) g.emplace(name, Tensor(t.shape));
  return g;
}

Encoder::Encoder(EncoderConfig cfg, Backend backend) : cfg_(cfg), backend_(backend) { cfg_.validate(); }

void Encoder::forward(const TensorMap& params, const Batch& batch, Activations& acts, Rng* rng) const {
  if (backend_ == Backend::Serial) {
    forward_impl<kernels::Serial>(params, batch, acts, rng);
  } else {
    forward_impl<kernels::Parallel>(params, batch, acts, rng);
  }
}

void Encoder::backward(const TensorMap& params, const Batch& batch, const Activations& acts,
                       std::vector<float>& d_hidden, TensorMap& grads) const {
  if (backend_ == Backend::Serial) {
    backward_impl<kernels::Serial>(params, batch, acts, d_hidden, grads);
  } else {
    backward_impl<kernels::Parallel>(params, batch, acts, d_hidden, grads);
  }
}

Encoder::MlmResult Encoder::mlm_loss(const TensorMap& params, const Activations& acts, std::span<const TokenId> targets,
                                     TokenId ignore_index, TensorMap* grads, std::vector<float>* d_hidden) const {
  if (backend_ == Backend::Serial) return mlm_impl<kernels::Serial>(params, acts, targets, ignore_index, grads, d_hidden);
  return mlm_impl<kernels::Parallel>(params, acts, targets, ignore_index, grads, d_hidden);
}

template <class K>
void Encoder::forward_impl(const TensorMap& params, const Batch& batch, Activations& acts, Rng* rng) const {
  const std::size_t N = batch.tokens(), Hd = cfg_.hidden, F = cfg_.ff;
  for (std::size_t i = 0; i < N; ++i) {
    if (batch.ids[i] < 0 || static_cast<std::size_t>(batch.ids[i]) >= cfg_.vocab) throw Error("token id out of range");
    if (static_cast<std::size_t>(batch.positions[i]) >= cfg_.max_len) throw Error("sequence longer than max_len");
  }
  if (batch.layout.heads != cfg_.heads) throw Error("batch packed for a different head count");

  acts.embed.resize(N * Hd);
  K::template embedding_forward<float>(acts.embed, batch.ids, batch.positions, P(params, "enc.tok_emb"),
                                       P(params, "enc.pos_emb"), Hd);
  acts.x0 = acts.embed;
  acts.dropout_mask.clear();
  if (rng != nullptr && cfg_.emb_dropout > 0.0f) {
    const float keep = 1.0f - cfg_.emb_dropout;
    acts.dropout_mask.resize(N * Hd);
    for (std::size_t i = 0; i < N * Hd; ++i) {
      acts.dropout_mask[i] = rng->bernoulli(keep) ? 1.0f / keep : 0.0f;
      acts.x0[i] *= acts.dropout_mask[i];
    }
  }

  acts.layers.resize(cfg_.layers);
  const std::vector<float>* x = &acts.x0;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    auto& a = acts.layers[l];
    const auto p = layer_prefix(l);
    a.ln1.resize(N * Hd);
    a.ln1_mean.resize(N);
    a.ln1_rstd.resize(N);
    K::template layernorm_forward<float>(a.ln1, a.ln1_mean, a.ln1_rstd, C(*x), P(params, p + "ln1.g"),
                                         P(params, p + "ln1.b"), N, Hd);
    a.qkv.resize(N * 3 * Hd);
    K::template linear_forward<float>(a.qkv, C(a.ln1), P(params, p + "attn.qkv.w"), P(params, p + "attn.qkv.b"), N, Hd,
                                      3 * Hd);
    a.att.resize(batch.layout.att_size());
    a.atty.resize(N * Hd);
    K::template attention_forward<float>(a.atty, a.att, C(a.qkv), batch.layout, Hd);
    a.attproj.resize(N * Hd);
    K::template linear_forward<float>(a.attproj, C(a.atty), P(params, p + "attn.out.w"), P(params, p + "attn.out.b"),
                                      N, Hd, Hd);
    a.res1.resize(N * Hd);
    K::template add<float>(a.res1, C(*x), C(a.attproj));
    a.ln2.resize(N * Hd);
    a.ln2_mean.resize(N);
    a.ln2_rstd.resize(N);
    K::template layernorm_forward<float>(a.ln2, a.ln2_mean, a.ln2_rstd, C(a.res1), P(params, p + "ln2.g"),
                                         P(params, p + "ln2.b"), N, Hd);
    a.up.resize(N * F);
    K::template linear_forward<float>(a.up, C(a.ln2), P(params, p + "ffn.up.w"), P(params, p + "ffn.up.b"), N, Hd, F);
    a.act.resize(N * F);
    K::template gelu_forward<float>(a.act, C(a.up));
    a.down.resize(N * Hd);
    K::template linear_forward<float>(a.down, C(a.act), P(params, p + "ffn.down.w"), P(params, p + "ffn.down.b"), N,
                                      F, Hd);
    a.res2.resize(N * Hd);
    K::template add<float>(a.res2, C(a.res1), C(a.down));
    x = &a.res2;
  }

  acts.hidden.resize(N * Hd);
  acts.lnf_mean.resize(N);
  acts.lnf_rstd.resize(N);
  K::template layernorm_forward<float>(acts.hidden, acts.lnf_mean, acts.lnf_rstd, C(*x), P(params, "enc.ln_f.g"),
                                       P(params, "enc.ln_f.b"), N, Hd);
}

template <class K>
void Encoder::backward_impl(const TensorMap& params, const Batch& batch, const Activations& acts,
                            std::vector<float>& d_hidden, TensorMap& grads) const {
  const std::size_t N = batch.tokens(), Hd = cfg_.hidden, F = cfg_.ff;
  if (d_hidden.size() != N * Hd) throw Error("d_hidden has the wrong size");

  auto input_of = [&](std::size_t l) -> const std::vector<float>& {
    return l == 0 ? acts.x0 : acts.layers[l - 1].res2;
  };
  const std::vector<float>& last = input_of(cfg_.layers);

  std::vector<float> dx(N * Hd, 0.0f);
  K::template layernorm_backward<float>(dx, G(grads, "enc.ln_f.g"), G(grads, "enc.ln_f.b"), C(d_hidden), C(last),
                                        P(params, "enc.ln_f.g"), C(acts.lnf_mean), C(acts.lnf_rstd), N, Hd);

  std::vector<float> dres1, dact(N * F), dup(N * F), dln2(N * Hd), datty(N * Hd), dqkv(N * 3 * Hd), dln1(N * Hd);
  for (std::size_t l = cfg_.layers; l-- > 0;) {
    const auto& a = acts.layers[l];
    const auto p = layer_prefix(l);
    const auto& x_in = input_of(l);

    // res2 = res1 + down
    dres1 = dx;
    std::fill(dact.begin(), dact.end(), 0.0f);
    K::template linear_backward<float>(dact, G(grads, p + "ffn.down.w"), G(grads, p + "ffn.down.b"), C(dx), C(a.act),
                                       P(params, p + "ffn.down.w"), N, F, Hd);
    std::fill(dup.begin(), dup.end(), 0.0f);
    K::template gelu_backward<float>(dup, C(a.up), C(dact));
    std::fill(dln2.begin(), dln2.end(), 0.0f);
    K::template linear_backward<float>(dln2, G(grads, p + "ffn.up.w"), G(grads, p + "ffn.up.b"), C(dup), C(a.ln2),
                                       P(params, p + "ffn.up.w"), N, Hd, F);
    K::template layernorm_backward<float>(dres1, G(grads, p + "ln2.g"), G(grads, p + "ln2.b"), C(dln2), C(a.res1),
                                          P(params, p + "ln2.g"), C(a.ln2_mean), C(a.ln2_rstd), N, Hd);

    // res1 = x_in + attproj
    dx = dres1;
    std::fill(datty.begin(), datty.end(), 0.0f);
    K::template linear_backward<float>(datty, G(grads, p + "attn.out.w"), G(grads, p + "attn.out.b"), C(dres1),
                                       C(a.atty), P(params, p + "attn.out.w"), N, Hd, Hd);
    std::fill(dqkv.begin(), dqkv.end(), 0.0f);
    K::template attention_backward<float>(dqkv, C(datty), C(a.qkv), C(a.att), batch.layout, Hd);
    std::fill(dln1.begin(), dln1.end(), 0.0f);
    K::template linear_backward<float>(dln1, G(grads, p + "attn.qkv.w"), G(grads, p + "attn.qkv.b"), C(dqkv), C(a.ln1),
                                       P(params, p + "attn.qkv.w"), N, Hd, 3 * Hd);
    K::template layernorm_backward<float>(dx, G(grads, p + "ln1.g"), G(grads, p + "ln1.b"), C(dln1), C(x_in),
                                          P(params, p + "ln1.g"), C(a.ln1_mean), C(a.ln1_rstd), N, Hd);
  }

  if (!acts.dropout_mask.empty()) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= acts.dropout_mask[i];
  }
  K::template embedding_backward<float>(G(grads, "enc.tok_emb"), G(grads, "enc.pos_emb"), C(dx), batch.ids,
                                        batch.positions, Hd);
}

std::vector<float> Encoder::pooled(const Batch& batch, const Activations& acts) const {
  const std::size_t Hd = cfg_.hidden;
  std::vector<float> out(batch.sequences() * Hd);
  for (std::size_t s = 0; s < batch.sequences(); ++s) {
    const auto row = batch.layout.offsets[s];
    std::copy_n(acts.hidden.begin() + static_cast<std::ptrdiff_t>(row * Hd), Hd,
                out.begin() + static_cast<std::ptrdiff_t>(s * Hd));
  }
  return out;
}

template <class K>
Encoder::MlmResult Encoder::mlm_impl(const TensorMap& params, const Activations& acts, std::span<const TokenId> targets,
                                     TokenId ignore_index, TensorMap* grads, std::vector<float>* d_hidden) const {
  const std::size_t Hd = cfg_.hidden, V = cfg_.vocab;
  std::vector<std::size_t> rows;
  std::vector<std::int32_t> tgt;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_index) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= V) throw Error("MLM target out of range");
    rows.push_back(i);
    tgt.push_back(targets[i]);
  }
  MlmResult r;
  const std::size_t M = rows.size();
  r.predicted = M;
  if (M == 0) return r;

  std::vector<float> sel(M * Hd);
  for (std::size_t m = 0; m < M; ++m) {
    std::copy_n(acts.hidden.begin() + static_cast<std::ptrdiff_t>(rows[m] * Hd), Hd,
                sel.begin() + static_cast<std::ptrdiff_t>(m * Hd));
  }
  std::vector<float> logits(M * V), probs(M * V), losses(M);
  K::template linear_forward<float>(logits, C(sel), P(params, "mlm.w"), P(params, "mlm.b"), M, Hd, V);
  K::template softmax_xent_forward<float>(probs, losses, C(logits), C(tgt), M, V);
  double total = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    total += losses[m];
    const auto* row = probs.data() + m * V;
    if (static_cast<std::int32_t>(std::max_element(row, row + V) - row) == tgt[m]) ++r.correct;
  }
  r.loss = total / static_cast<double>(M);

  if (grads != nullptr) {
    std::vector<float> dlogits(M * V), dsel(M * Hd, 0.0f);
    K::template softmax_xent_backward<float>(dlogits, C(probs), C(tgt), 1.0f / static_cast<float>(M), M, V);
    K::template linear_backward<float>(dsel, G(*grads, "mlm.w"), G(*grads, "mlm.b"), C(dlogits), C(sel),
                                       P(params, "mlm.w"), M, Hd, V);
    if (d_hidden != nullptr) {
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t c = 0; c < Hd; ++c) (*d_hidden)[rows[m] * Hd + c] += dsel[m * Hd + c];
      }
    }
  }
  return r;
}

}  // namespace emoid::model
