#include "emoid/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "emoid/evaluation.hpp"
#include "emoid/hash.hpp"
#include "emoid/text.hpp"

namespace emoid::model {

namespace {

using nlohmann::json;

// Fixed stream ids so the individual random consumers of a run stay
// independent of each other.
enum Stream : std::uint64_t {
  kInit = 1,
  kOrder = 2,
  kMasking = 3,
  kDropout = 4,
  kHead = 5,
  kProbeOrder = 6,
  kTuneOrder = 7,
  kTuneDropout = 8,
};

constexpr std::size_t kInferenceChunk = 64;

bool all_tensors(const std::string&) { return true; }

std::string stage_hash(std::string_view stage, const json& payload) {
  return sha256_hex(json{{"stage", stage}, {"config", payload}}.dump());
}

void zero(TensorMap& m) {
  for (auto& [_, t] : m) std::fill(t.data.begin(), t.data.end(), 0.0f);
}

// Cycles through shuffled epochs of [0, n) without replacement.
class Sampler {
 public:
  Sampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) { refill(); }
  std::vector<std::size_t> next(std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
      if (pos_ == perm_.size()) refill();
      out.push_back(perm_[pos_++]);
    }
    return out;
  }

 private:
  void refill() {
    perm_ = rng_.permutation(n_);
    pos_ = 0;
  }
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

void add_scaled(Tensor& dst, std::span<const double> src, double scale) {
  for (std::size_t i = 0; i < src.size(); ++i) dst.data[i] += static_cast<float>(src[i] * scale);
}

void record(TrainLog* log, std::string stage, std::size_t step, double loss, double metric = 0.0) {
  if (log != nullptr) log->push_back({std::move(stage), step, loss, metric});
}

void check_labeled(const LabeledData& d, std::string_view what) {
  if (d.size() == 0) throw Error(std::string(what) + ": labeled data is empty");
  if (d.labels.size() != d.texts.size()) throw Error(std::string(what) + ": texts and labels differ in length");
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

std::array<double, kNumLabels> softmax(std::span<const double> logits) {
  std::array<double, kNumLabels> p{};
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) sum += (p[k] = std::exp(logits[k] - mx));
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw Error(std::string(what) + " must be positive");
  };
  positive(pretrain.lr, "pretrain.lr");
  positive(probe.lr, "probe.lr");
  positive(finetune.lr, "finetune.lr");
  if (pretrain.batch == 0 || probe.batch == 0 || finetune.effective_batch == 0 || finetune.micro_batch == 0)
    throw Error("batch sizes must be positive");
  if (pretrain.weight_decay < 0.0 || finetune.weight_decay < 0.0) throw Error("weight decay must be non-negative");
  JointLossConfig{contrastive.weight, contrastive.temperature, finetune.label_smoothing}.validate();
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw Error("optimizer betas must lie in [0,1)");
  positive(optimizer.eps, "optimizer.eps");
  if (optimizer.max_grad_norm < 0.0) throw Error("max_grad_norm must be non-negative");
  if (log_every == 0) throw Error("log_every must be positive");
}

json TrainConfig::to_json() const {
  return json{
      {"pretrain", {{"lr", pretrain.lr}, {"batch", pretrain.batch}, {"steps", pretrain.steps},
                    {"weight_decay", pretrain.weight_decay}}},
      {"probe", {{"lr", probe.lr}, {"steps", probe.steps}, {"batch", probe.batch}}},
      {"finetune", {{"lr", finetune.lr}, {"weight_decay", finetune.weight_decay},
                    {"label_smoothing", finetune.label_smoothing}, {"epochs", finetune.epochs},
                    {"effective_batch", finetune.effective_batch}, {"micro_batch", finetune.micro_batch}}},
      {"contrastive", {{"weight", contrastive.weight}, {"temperature", contrastive.temperature}}},
      {"optimizer", {{"beta1", optimizer.beta1}, {"beta2", optimizer.beta2}, {"eps", optimizer.eps},
                     {"max_grad_norm", optimizer.max_grad_norm}}},
      {"log_every", log_every},
      {"seed", seed},
  };
}

json TrainConfig::stage_json(std::string_view stage) const {
  const json all = to_json();
  if (stage == "pretrain") return json{{"pretrain", all["pretrain"]}, {"optimizer", all["optimizer"]}, {"seed", seed}};
  if (stage == "probe")
    return json{{"probe", all["probe"]},
                {"optimizer", all["optimizer"]},
                {"label_smoothing", finetune.label_smoothing},
                {"temperature", contrastive.temperature},
                {"seed", seed}};
  if (stage == "finetune") {
    json out = all;
    out.erase("pretrain");
    out.erase("probe");
    out.erase("log_every");
    return out;
  }
  throw Error("unknown training stage '" + std::string(stage) + "'");
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  auto sect = [&](const char* k) { return j.contains(k) ? j.at(k) : json::object(); };
  const auto pt = sect("pretrain"), pr = sect("probe"), ft = sect("finetune"), co = sect("contrastive"),
             op = sect("optimizer");
  c.pretrain.lr = pt.value("lr", c.pretrain.lr);
  c.pretrain.batch = pt.value("batch", c.pretrain.batch);
  c.pretrain.steps = pt.value("steps", c.pretrain.steps);
  c.pretrain.weight_decay = pt.value("weight_decay", c.pretrain.weight_decay);
  c.probe.lr = pr.value("lr", c.probe.lr);
  c.probe.steps = pr.value("steps", c.probe.steps);
  c.probe.batch = pr.value("batch", c.probe.batch);
  c.finetune.lr = ft.value("lr", c.finetune.lr);
  c.finetune.weight_decay = ft.value("weight_decay", c.finetune.weight_decay);
  c.finetune.label_smoothing = ft.value("label_smoothing", c.finetune.label_smoothing);
  c.finetune.epochs = ft.value("epochs", c.finetune.epochs);
  c.finetune.effective_batch = ft.value("effective_batch", c.finetune.effective_batch);
  c.finetune.micro_batch = ft.value("micro_batch", c.finetune.micro_batch);
  c.contrastive.weight = co.value("weight", c.contrastive.weight);
  c.contrastive.temperature = co.value("temperature", c.contrastive.temperature);
  c.optimizer.beta1 = op.value("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = op.value("beta2", c.optimizer.beta2);
  c.optimizer.eps = op.value("eps", c.optimizer.eps);
  c.optimizer.max_grad_norm = op.value("max_grad_norm", c.optimizer.max_grad_norm);
  c.log_every = j.value("log_every", c.log_every);
  c.seed = j.value("seed", c.seed);
  return c;
}

void AdamW::step(TensorMap& params, TensorMap& grads, double lr, double weight_decay,
                 const std::function<bool(const std::string&)>& trainable) {
  ++t_;
  for (auto& [name, g] : grads) {
    if (!trainable(name)) continue;
    auto pit = params.find(name);
    if (pit == params.end()) throw Error("gradient without parameter: " + name);
    auto& p = pit->second;
    auto [mit, m_new] = m_.try_emplace(name, Tensor(p.shape));
    auto [vit, v_new] = v_.try_emplace(name, Tensor(p.shape));
    const double wd = p.shape.size() >= 2 ? weight_decay : 0.0;
    kernels::Parallel::adamw_step<float>(p.data, g.data, mit->second.data, vit->second.data, lr, cfg_.beta1,
                                         cfg_.beta2, cfg_.eps, wd, t_);
  }
}

double clip_grad_norm(TensorMap& grads, double max_norm, const std::function<bool(const std::string&)>& selected) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    if (!selected(name)) continue;
    for (float x : g.data) sq += static_cast<double>(x) * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto s = static_cast<float>(max_norm / (norm + 1e-6));
    for (auto& [name, g] : grads) {
      if (!selected(name)) continue;
      for (auto& x : g.data) x *= s;
    }
  }
  return norm;
}

ModelCheckpoint initial_checkpoint(std::span<const std::string> corpus, const EncoderConfig& encoder_cfg,
                                   std::uint64_t seed) {
  if (corpus.empty()) throw Error("cannot fit a vocabulary on an empty corpus");
  ModelCheckpoint ck;
  ck.tokenizer = WordTokenizer::fit(corpus, encoder_cfg.vocab);
  EncoderConfig ec = encoder_cfg;
  ec.vocab = ck.tokenizer.size();
  ec.validate();
  ck.tensors = init_encoder(ec, derive_seed(seed, kInit));
  ck.tensors.merge(init_mlm_head(ec, derive_seed(seed, kInit + 100)));
  ck.encoder = ec.to_json();
  ck.provenance = {"init", stage_hash("init", json{{"encoder", ec.to_json()}, {"seed", seed}}), {},
                   std::string(code_version())};
  return ck;
}

ModelCheckpoint pretrain_mlm(std::span<const std::string> corpus, const EncoderConfig& encoder_cfg,
                             const TrainConfig& cfg, const emlm::MaskingConfig& masking,
                             const std::set<std::string>& emotion_words, const ModelCheckpoint* init, TrainLog* log) {
  cfg.validate();
  masking.validate();
  if (corpus.empty()) throw Error("pre-training corpus is empty");

  ModelCheckpoint ck = init != nullptr ? *init : initial_checkpoint(corpus, encoder_cfg, cfg.seed);
  const EncoderConfig ec = EncoderConfig::from_json(ck.encoder);
  std::erase_if(ck.tensors, [](const auto& kv) { return is_head_tensor(kv.first); });
  if (!ck.tensors.contains("mlm.w")) ck.tensors.merge(init_mlm_head(ec, derive_seed(cfg.seed, kInit + 100)));
  const std::vector<std::string> parents =
      init != nullptr ? std::vector<std::string>{init->content_hash()} : std::vector<std::string>{};

  const Encoder enc(ec);
  std::vector<emlm::EncodedText> encoded(corpus.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < corpus.size(); ++i)
    encoded[i] = emlm::encode_with_emotion_mask(corpus[i], ck.tokenizer, emotion_words, ec.max_len);

  Sampler sampler(corpus.size(), derive_seed(cfg.seed, kOrder));
  Rng mask_rng(derive_seed(cfg.seed ^ masking.seed, kMasking));
  Rng drop_rng(derive_seed(cfg.seed, kDropout));
  AdamW opt(cfg.optimizer);
  TensorMap grads = zeros_like(ck.tensors);
  Activations acts;
  const std::size_t batch_size = std::min(cfg.pretrain.batch, corpus.size());

  double window = 0.0;
  std::size_t window_n = 0;
  for (std::size_t step = 1; step <= cfg.pretrain.steps; ++step) {
    std::vector<std::vector<TokenId>> inputs;
    std::vector<TokenId> targets;
    for (std::size_t i : sampler.next(batch_size)) {
      auto ex = emlm::make_mlm_example(encoded[i].ids, encoded[i].emotion_mask, masking, mask_rng, ec.vocab);
      targets.insert(targets.end(), ex.labels.begin(), ex.labels.end());
      inputs.push_back(std::move(ex.input_ids));
    }
    const Batch batch = Batch::pack(inputs, ec.heads);
    enc.forward(ck.tensors, batch, acts, &drop_rng);
    zero(grads);
    std::vector<float> d_hidden(batch.tokens() * ec.hidden, 0.0f);
    const auto r = enc.mlm_loss(ck.tensors, acts, targets, masking.ignore_index, &grads, &d_hidden);
    if (r.predicted == 0) continue;  // nothing selected in this batch
    if (!std::isfinite(r.loss)) throw DivergenceError("pretrain", step);
    enc.backward(ck.tensors, batch, acts, d_hidden, grads);
    clip_grad_norm(grads, cfg.optimizer.max_grad_norm, all_tensors);
    opt.step(ck.tensors, grads, cfg.pretrain.lr, cfg.pretrain.weight_decay, all_tensors);

    window += r.loss;
    ++window_n;
    if (step % cfg.log_every == 0 || step == cfg.pretrain.steps) {
      const double mean = window / static_cast<double>(window_n);
      spdlog::info("pretrain step {}/{} mlm loss {:.4f}", step, cfg.pretrain.steps, mean);
      record(log, "pretrain", step, mean);
      window = 0.0;
      window_n = 0;
    }
  }
  ck.provenance = {"pretrain",
                   stage_hash("pretrain", json{{"train", cfg.stage_json("pretrain")},
                                               {"encoder", ec.to_json()},
                                               {"masking", {{"p_emotion", masking.p_emotion},
                                                            {"p_other", masking.p_other},
                                                            {"seed", masking.seed}}},
                                               {"corpus_size", corpus.size()}}),
                   parents, std::string(code_version())};
  return ck;
}

MlmEval evaluate_mlm(const ModelCheckpoint& ckpt, std::span<const std::string> texts, const emlm::MaskingConfig& masking,
                     const std::set<std::string>& emotion_words) {
  const EncoderConfig ec = EncoderConfig::from_json(ckpt.encoder);
  const Encoder enc(ec);
  Rng rng(derive_seed(masking.seed, kMasking));
  MlmEval out;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  Activations acts;
  for (std::size_t start = 0; start < texts.size(); start += kInferenceChunk) {
    std::vector<std::vector<TokenId>> inputs;
    std::vector<TokenId> targets;
    for (std::size_t i = start; i < std::min(texts.size(), start + kInferenceChunk); ++i) {
      const auto e = emlm::encode_with_emotion_mask(texts[i], ckpt.tokenizer, emotion_words, ec.max_len);
      auto ex = emlm::make_mlm_example(e.ids, e.emotion_mask, masking, rng, ec.vocab);
      targets.insert(targets.end(), ex.labels.begin(), ex.labels.end());
      inputs.push_back(std::move(ex.input_ids));
    }
    const Batch batch = Batch::pack(inputs, ec.heads);
    enc.forward(ckpt.tensors, batch, acts, nullptr);
    const auto r = enc.mlm_loss(ckpt.tensors, acts, targets, masking.ignore_index, nullptr, nullptr);
    loss_sum += r.loss * static_cast<double>(r.predicted);
    correct += r.correct;
    out.predicted += r.predicted;
  }
  if (out.predicted > 0) {
    out.loss = loss_sum / static_cast<double>(out.predicted);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(out.predicted);
  }
  return out;
}

std::vector<float> pooled_features(const ModelCheckpoint& ckpt, std::span<const std::string> texts) {
  const EncoderConfig ec = EncoderConfig::from_json(ckpt.encoder);
  const Encoder enc(ec);
  std::vector<float> out;
  out.reserve(texts.size() * ec.hidden);
  Activations acts;
  for (std::size_t start = 0; start < texts.size(); start += kInferenceChunk) {
    std::vector<std::vector<TokenId>> seqs;
    for (std::size_t i = start; i < std::min(texts.size(), start + kInferenceChunk); ++i)
      seqs.push_back(ckpt.tokenizer.encode(texts[i], ec.max_len));
    const Batch batch = Batch::pack(seqs, ec.heads);
    enc.forward(ckpt.tensors, batch, acts, nullptr);
    const auto pooled = enc.pooled(batch, acts);
    out.insert(out.end(), pooled.begin(), pooled.end());
  }
  return out;
}

ModelCheckpoint linear_probe(const ModelCheckpoint& base, const LabeledData& data, const TrainConfig& cfg,
                             TrainLog* log) {
  cfg.validate();
  check_labeled(data, "linear probe");
  const EncoderConfig ec = EncoderConfig::from_json(base.encoder);
  const std::size_t H = ec.hidden, K = kHeadOutputs;

  ModelCheckpoint out;
  out.encoder = base.encoder;
  out.tokenizer = base.tokenizer;
  for (const auto& [name, t] : base.tensors) {
    if (is_encoder_tensor(name)) out.tensors.emplace(name, t);
  }
  out.tensors.merge(init_classifier_head(ec, derive_seed(cfg.seed, kHead)));

  const auto features = to_double(pooled_features(base, data.texts));
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = index_of(data.labels[i]);

  const JointLossConfig loss_cfg{0.0, cfg.contrastive.temperature, cfg.finetune.label_smoothing};
  AdamW opt(cfg.optimizer);
  TensorMap grads;
  grads.emplace("head.w", Tensor(out.tensors.at("head.w").shape));
  grads.emplace("head.b", Tensor(out.tensors.at("head.b").shape));
  Sampler sampler(data.size(), derive_seed(cfg.seed, kProbeOrder));
  const std::size_t batch_size = std::min(cfg.probe.batch, data.size());

  double window = 0.0;
  std::size_t window_n = 0;
  for (std::size_t step = 1; step <= cfg.probe.steps; ++step) {
    const auto idx = sampler.next(batch_size);
    std::vector<double> x(idx.size() * H);
    std::vector<std::size_t> y(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(idx[b] * H), H,
                  x.begin() + static_cast<std::ptrdiff_t>(b * H));
      y[b] = labels[idx[b]];
    }
    const auto w = to_double(out.tensors.at("head.w").data);
    const auto bias = to_double(out.tensors.at("head.b").data);
    const auto r = joint_loss(x, y, H, w, bias, K, loss_cfg, true);
    if (!std::isfinite(r.loss)) throw DivergenceError("probe", step);
    zero(grads);
    add_scaled(grads.at("head.w"), r.d_head_w, 1.0);
    add_scaled(grads.at("head.b"), r.d_head_b, 1.0);
    clip_grad_norm(grads, cfg.optimizer.max_grad_norm, is_head_tensor);
    opt.step(out.tensors, grads, cfg.probe.lr, 0.0, is_head_tensor);

    window += r.loss;
    ++window_n;
    if (step % cfg.log_every == 0 || step == cfg.probe.steps) {
      const double mean = window / static_cast<double>(window_n);
      spdlog::info("probe step {}/{} loss {:.4f}", step, cfg.probe.steps, mean);
      record(log, "probe", step, mean);
      window = 0.0;
      window_n = 0;
    }
  }
  out.provenance = {"probe",
                    stage_hash("probe", json{{"train", cfg.stage_json("probe")}, {"n", data.size()}}),
                    {base.content_hash()}, std::string(code_version())};
  return out;
}

ModelCheckpoint fine_tune(const ModelCheckpoint& probed, const LabeledData& train, const LabeledData* dev,
                          const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  if (!probed.tensors.contains("head.w") || !probed.tensors.contains("head.b"))
    throw Error("fine-tuning needs a checkpoint with a trained classifier head");
  if (cfg.finetune.epochs == 0) return probed;
  check_labeled(train, "fine-tune");
  if (dev != nullptr && dev->size() > 0) check_labeled(*dev, "fine-tune dev");

  const EncoderConfig ec = EncoderConfig::from_json(probed.encoder);
  const std::size_t H = ec.hidden, K = kHeadOutputs;
  const Encoder enc(ec);
  ModelCheckpoint ck = probed;
  std::erase_if(ck.tensors, [](const auto& kv) { return is_mlm_tensor(kv.first); });

  std::vector<std::vector<TokenId>> encoded(train.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < train.size(); ++i) encoded[i] = ck.tokenizer.encode(train.texts[i], ec.max_len);

  const JointLossConfig loss_cfg{cfg.contrastive.weight, cfg.contrastive.temperature, cfg.finetune.label_smoothing};
  AdamW opt(cfg.optimizer);
  TensorMap grads = zeros_like(ck.tensors);
  Rng order_rng(derive_seed(cfg.seed, kTuneOrder));
  Rng drop_rng(derive_seed(cfg.seed, kTuneDropout));
  Activations acts;
  const std::size_t eff = cfg.finetune.effective_batch;
  const std::size_t micro = std::min(cfg.finetune.micro_batch, eff);

  std::size_t step = 0;
  double window = 0.0;
  std::size_t window_n = 0;
  for (std::size_t epoch = 1; epoch <= cfg.finetune.epochs; ++epoch) {
    const auto perm = order_rng.permutation(train.size());
    for (std::size_t start = 0; start < perm.size(); start += eff) {
      const std::size_t stop = std::min(perm.size(), start + eff);
      const double chunk = static_cast<double>(stop - start);
      zero(grads);
      double loss = 0.0;
      for (std::size_t ms = start; ms < stop; ms += micro) {
        const std::size_t me = std::min(stop, ms + micro);
        std::vector<std::vector<TokenId>> seqs;
        std::vector<std::size_t> y;
        for (std::size_t k = ms; k < me; ++k) {
          seqs.push_back(encoded[perm[k]]);
          y.push_back(index_of(train.labels[perm[k]]));
        }
        const Batch batch = Batch::pack(seqs, ec.heads);
        enc.forward(ck.tensors, batch, acts, &drop_rng);
        const auto pooled = to_double(enc.pooled(batch, acts));
        const auto w = to_double(ck.tensors.at("head.w").data);
        const auto bias = to_double(ck.tensors.at("head.b").data);
        const auto r = joint_loss(pooled, y, H, w, bias, K, loss_cfg, true);
        if (!std::isfinite(r.loss)) throw DivergenceError("fine-tune", step + 1);
        const double scale = static_cast<double>(me - ms) / chunk;
        loss += r.loss * scale;
        add_scaled(grads.at("head.w"), r.d_head_w, scale);
        add_scaled(grads.at("head.b"), r.d_head_b, scale);
        std::vector<float> d_hidden(batch.tokens() * H, 0.0f);
        for (std::size_t s = 0; s < batch.sequences(); ++s) {
          const auto row = static_cast<std::size_t>(batch.layout.offsets[s]);
          for (std::size_t c = 0; c < H; ++c) d_hidden[row * H + c] = static_cast<float>(r.d_pooled[s * H + c] * scale);
        }
        enc.backward(ck.tensors, batch, acts, d_hidden, grads);
      }
      clip_grad_norm(grads, cfg.optimizer.max_grad_norm, all_tensors);
      opt.step(ck.tensors, grads, cfg.finetune.lr, cfg.finetune.weight_decay, all_tensors);
      ++step;
      window += loss;
      ++window_n;
      if (step % cfg.log_every == 0) {
        const double mean = window / static_cast<double>(window_n);
        spdlog::info("fine-tune step {} (epoch {}) loss {:.4f}", step, epoch, mean);
        record(log, "finetune", step, mean);
        window = 0.0;
        window_n = 0;
      }
    }
    if (dev != nullptr && dev->size() > 0) {
      const auto preds = predict(ck, dev->texts);
      std::vector<EmotionLabel> pl(preds.size());
      for (std::size_t i = 0; i < preds.size(); ++i) pl[i] = preds[i].label;
      const double f1 = eval::macro_f1(dev->labels, pl, kAllLabels).macro;
      spdlog::info("fine-tune epoch {}/{} dev macro-F1 {:.2f}", epoch, cfg.finetune.epochs, f1);
      record(log, "finetune-dev", epoch, window_n > 0 ? window / static_cast<double>(window_n) : 0.0, f1);
    }
  }
  ck.provenance = {"finetune",
                   stage_hash("finetune", json{{"train", cfg.stage_json("finetune")}, {"n", train.size()}}),
                   {probed.content_hash()}, std::string(code_version())};
  return ck;
}

EmotionLabel argmax_label(const std::array<double, kNumLabels>& scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return kAllLabels[best];
}

Classifier::Classifier(ModelCheckpoint ckpt) : ckpt_(std::move(ckpt)), cfg_(EncoderConfig::from_json(ckpt_.encoder)) {
  if (!ckpt_.tensors.contains("head.w") || !ckpt_.tensors.contains("head.b"))
    throw Error("checkpoint has no classifier head");
}

std::vector<Prediction> Classifier::predict(std::span<const std::string> texts) const {
  std::vector<Prediction> out(texts.size());
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (blank(texts[i])) {
      out[i].probs.fill(1.0 / static_cast<double>(kNumLabels));
      out[i].degenerate = true;
    } else {
      live.push_back(i);
    }
  }
  const Encoder enc(cfg_);
  const std::size_t H = cfg_.hidden;
  const auto& w = ckpt_.tensors.at("head.w").data;
  const auto& b = ckpt_.tensors.at("head.b").data;
  Activations acts;
  for (std::size_t start = 0; start < live.size(); start += kInferenceChunk) {
    const std::size_t stop = std::min(live.size(), start + kInferenceChunk);
    std::vector<std::vector<TokenId>> seqs;
    for (std::size_t k = start; k < stop; ++k) seqs.push_back(ckpt_.tokenizer.encode(texts[live[k]], cfg_.max_len));
    const Batch batch = Batch::pack(seqs, cfg_.heads);
    enc.forward(ckpt_.tensors, batch, acts, nullptr);
    const auto pooled = enc.pooled(batch, acts);
    for (std::size_t s = 0; s < stop - start; ++s) {
      std::array<double, kNumLabels> logits{};
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        double acc = b[c];
        for (std::size_t d = 0; d < H; ++d) acc += static_cast<double>(w[c * H + d]) * pooled[s * H + d];
        logits[c] = acc;
      }
      auto& p = out[live[start + s]];
      p.probs = softmax(logits);
      p.label = argmax_label(p.probs);
    }
  }
  return out;
}

Prediction Classifier::predict_one(std::string_view text) const {
  const std::string t(text);
  return predict(std::span<const std::string>(&t, 1)).front();
}

std::vector<Prediction> predict(const ModelCheckpoint& ckpt, std::span<const std::string> texts) {
  return Classifier(ckpt).predict(texts);
}

}  // namespace emoid::model
