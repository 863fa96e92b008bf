#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>

#include "emoid/checkpoint.hpp"
#include "emoid/encoder.hpp"
#include "emoid/evaluation.hpp"
#include "emoid/fixture.hpp"
#include "emoid/jsonl.hpp"
#include "emoid/trainer.hpp"
#include "support.hpp"

using namespace emoid;
using namespace emoid::model;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.layers = 2;
  c.hidden = 8;
  c.heads = 2;
  c.ff = 16;
  c.vocab = 20;
  c.max_len = 8;
  c.emb_dropout = 0.0f;
  c.init_std = 0.3f;
  return c;
}

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.layers = 1;
  c.hidden = 32;
  c.heads = 4;
  c.ff = 64;
  c.vocab = 400;
  c.max_len = 32;
  return c;
}

TrainConfig quick_train() {
  TrainConfig t;
  t.pretrain.lr = 2e-3;
  t.pretrain.batch = 32;
  t.pretrain.steps = 200;
  t.probe.lr = 1e-2;
  t.probe.steps = 200;
  t.probe.batch = 64;
  t.finetune.lr = 1e-3;
  t.finetune.epochs = 2;
  t.finetune.effective_batch = 32;
  t.finetune.micro_batch = 16;
  t.log_every = 20;
  return t;
}

bool same_bytes(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

LabeledData to_data(const std::vector<corpus::CleanPost>& posts) {
  LabeledData d;
  for (const auto& p : posts) {
    d.texts.push_back(p.text);
    d.labels.push_back(p.label);
  }
  return d;
}

std::vector<std::string> texts_of(const std::vector<corpus::CleanPost>& posts) {
  std::vector<std::string> out;
  for (const auto& p : posts) out.push_back(p.text);
  return out;
}

std::vector<corpus::CleanPost> fixture_posts(std::size_t n, std::uint64_t seed = 2024, double noise = 0.1) {
  fixture::FixtureConfig fc;
  fc.posts = n;
  fc.seed = seed;
  fc.label_noise = noise;
  return fixture::synth_clean_posts(fc);
}

struct Objective {
  const Encoder& enc;
  const Batch& batch;
  std::vector<TokenId> targets;
  double operator()(const TensorMap& params) const {
    Activations acts;
    enc.forward(params, batch, acts, nullptr);
    return enc.mlm_loss(params, acts, targets, -100, nullptr, nullptr).loss;
  }
};

}  // namespace

TEST_CASE("encoder config validation") {
  EncoderConfig c = tiny_encoder();
  CHECK_NOTHROW(c.validate());
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(EncoderConfig::from_json(tiny_encoder().to_json()) == tiny_encoder());
}

TEST_CASE("serial and parallel encoders agree") {
  const auto cfg = tiny_encoder();
  TensorMap params = init_encoder(cfg, 1);
  params.merge(init_mlm_head(cfg, 2));
  const std::vector<std::vector<TokenId>> seqs{{3, 7, 8, 9, 4}, {3, 10, 4}, {3, 11, 12, 13, 14, 15, 4}};
  const auto batch = Batch::pack(seqs, cfg.heads);
  const Encoder par(cfg, kernels::Backend::Parallel), ser(cfg, kernels::Backend::Serial);
  Activations a, b;
  par.forward(params, batch, a, nullptr);
  ser.forward(params, batch, b, nullptr);
  REQUIRE(a.hidden.size() == b.hidden.size());
  for (std::size_t i = 0; i < a.hidden.size(); ++i) CHECK(a.hidden[i] == doctest::Approx(b.hidden[i]).epsilon(1e-5));

  std::vector<TokenId> targets(batch.tokens(), 5);
  TensorMap ga = zeros_like(params), gb = zeros_like(params);
  std::vector<float> da(a.hidden.size(), 0.0f), db(b.hidden.size(), 0.0f);
  par.mlm_loss(params, a, targets, -100, &ga, &da);
  ser.mlm_loss(params, b, targets, -100, &gb, &db);
  par.backward(params, batch, a, da, ga);
  ser.backward(params, batch, b, db, gb);
  for (const auto& [name, g] : ga) {
    CAPTURE(name);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.data[i] == doctest::Approx(gb.at(name).data[i]).epsilon(1e-4).scale(1e-3));
  }
}

TEST_CASE("packed sequences are independent of their batch neighbours") {
  const auto cfg = tiny_encoder();
  const TensorMap params = init_encoder(cfg, 3);
  const Encoder enc(cfg);
  const std::vector<std::vector<TokenId>> both{{3, 7, 8, 4}, {3, 9, 10, 11, 4}};
  const std::vector<std::vector<TokenId>> alone{{3, 9, 10, 11, 4}};
  Activations a, b;
  const auto ba = Batch::pack(both, cfg.heads), bb = Batch::pack(alone, cfg.heads);
  enc.forward(params, ba, a, nullptr);
  enc.forward(params, bb, b, nullptr);
  const auto pa = enc.pooled(ba, a), pb = enc.pooled(bb, b);
  for (std::size_t c = 0; c < cfg.hidden; ++c) CHECK(pa[cfg.hidden + c] == doctest::Approx(pb[c]).epsilon(1e-6));
}

TEST_CASE("encoder and MLM head gradients match finite differences") {
  const auto cfg = tiny_encoder();
  TensorMap params = init_encoder(cfg, 11);
  params.merge(init_mlm_head(cfg, 12));
  const std::vector<std::vector<TokenId>> seqs{{3, 7, 8, 9, 4}, {3, 10, 6, 4}};
  const auto batch = Batch::pack(seqs, cfg.heads);
  const Encoder enc(cfg, kernels::Backend::Serial);
  Objective f{enc, batch, {-100, 7, 12, 9, -100, -100, 10, 6, 4}};

  Activations acts;
  enc.forward(params, batch, acts, nullptr);
  TensorMap grads = zeros_like(params);
  std::vector<float> dh(acts.hidden.size(), 0.0f);
  enc.mlm_loss(params, acts, f.targets, -100, &grads, &dh);
  enc.backward(params, batch, acts, dh, grads);

  Rng rng(13);
  std::size_t checked = 0;
  for (auto& [name, t] : params) {
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = rng.below(t.size());
      const float keep = t.data[i];
      const float h = 1e-2f;
      t.data[i] = keep + h;
      const double up = f(params);
      t.data[i] = keep - h;
      const double down = f(params);
      t.data[i] = keep;
      const double num = (up - down) / (2.0 * h);
      const double ana = grads.at(name).data[i];
      CAPTURE(name);
      CAPTURE(i);
      CHECK(std::abs(num - ana) <= 3e-2 * std::max(std::abs(num), std::abs(ana)) + 3e-4);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("embedding dropout only in training mode") {
  auto cfg = tiny_encoder();
  cfg.emb_dropout = 0.5f;
  const TensorMap params = init_encoder(cfg, 4);
  const Encoder enc(cfg);
  const std::vector<std::vector<TokenId>> seqs{{3, 7, 8, 9, 4}};
  const auto batch = Batch::pack(seqs, cfg.heads);
  Activations eval_a, eval_b, train_a;
  enc.forward(params, batch, eval_a, nullptr);
  enc.forward(params, batch, eval_b, nullptr);
  CHECK(eval_a.hidden == eval_b.hidden);
  Rng rng(1);
  enc.forward(params, batch, train_a, &rng);
  CHECK(train_a.hidden != eval_a.hidden);
}

TEST_CASE("checkpoint save and load is bit-exact") {
  testing::ScratchDir dir("ckpt");
  const auto posts = fixture_posts(200);
  auto ck = initial_checkpoint(texts_of(posts), small_encoder(), 7);
  ck.tensors.merge(init_classifier_head(EncoderConfig::from_json(ck.encoder), 8));
  ck.provenance.parents = {"abc"};
  save_checkpoint(dir / "a", ck);
  const auto back = load_checkpoint(dir / "a");
  CHECK(back == ck);
  for (const auto& [name, t] : ck.tensors) CHECK(same_bytes(t, back.tensors.at(name)));
  CHECK(back.content_hash() == ck.content_hash());

  // saving the loaded copy reproduces the same files
  save_checkpoint(dir / "b", back);
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    const auto leaf = entry.path().filename().string();
    CAPTURE(leaf);
    CHECK(jsonl::read_text(entry.path().string()) == jsonl::read_text(dir / ("b/" + leaf)));
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);
}

TEST_CASE("weight averaging") {
  const auto posts = fixture_posts(100);
  const auto m = initial_checkpoint(texts_of(posts), small_encoder(), 1);
  const auto other = initial_checkpoint(texts_of(posts), small_encoder(), 2);

  const auto mm = average_weights(m, m);
  for (const auto& [name, t] : m.tensors) CHECK(same_bytes(t, mm.tensors.at(name)));

  const auto ab = average_weights(m, other), ba = average_weights(other, m);
  for (const auto& [name, t] : ab.tensors) {
    CHECK(same_bytes(t, ba.tensors.at(name)));
    const auto& x = m.tensors.at(name).data;
    const auto& y = other.tensors.at(name).data;
    for (std::size_t i = 0; i < t.size(); i += 97) CHECK(t.data[i] == doctest::Approx(0.5 * (x[i] + y[i])));
  }
  CHECK(ab.provenance.stage == "soup");
  CHECK(ab.provenance.parents.size() == 2);

  ModelCheckpoint s0 = m, s2 = m;
  s0.tensors = {{"x", Tensor({1})}};
  s2.tensors = {{"x", Tensor({1})}};
  s2.tensors.at("x").data[0] = 2.0f;
  CHECK(average_weights(s0, s2).tensors.at("x").data[0] == 1.0f);

  ModelCheckpoint missing = m;
  missing.tensors.erase("mlm.b");
  CHECK_THROWS_WITH_AS(average_weights(m, missing), doctest::Contains("mlm.b"), Error);
  ModelCheckpoint reshaped = m;
  reshaped.tensors.at("mlm.b").shape = {1, static_cast<std::int64_t>(reshaped.tensors.at("mlm.b").size())};
  CHECK_THROWS_WITH_AS(average_weights(m, reshaped), doctest::Contains("mlm.b"), Error);
}

TEST_CASE("AdamW skips decay on vectors and respects the trainable filter") {
  TensorMap params{{"m", Tensor({2, 2})}, {"v", Tensor({2})}, {"frozen", Tensor({2, 2})}};
  for (auto& [_, t] : params) std::fill(t.data.begin(), t.data.end(), 1.0f);
  TensorMap grads = zeros_like(params);
  AdamW opt(TrainConfig::Optimizer{});
  opt.step(params, grads, 0.1, 0.5, [](const std::string& n) { return n != "frozen"; });
  CHECK(params.at("m").data[0] == doctest::Approx(0.95));
  CHECK(params.at("v").data[0] == 1.0f);
  CHECK(params.at("frozen").data[0] == 1.0f);
  CHECK(opt.steps() == 1);
}

TEST_CASE("gradient clipping") {
  TensorMap g{{"a", Tensor({2})}, {"b", Tensor({1})}};
  g.at("a").data = {3.0f, 0.0f};
  g.at("b").data = {4.0f};
  const auto all = [](const std::string&) { return true; };
  CHECK(clip_grad_norm(g, 1.0, all) == doctest::Approx(5.0));
  CHECK(g.at("a").data[0] == doctest::Approx(0.6));
  CHECK(g.at("b").data[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(g, 0.0, all) == doctest::Approx(1.0));  // disabled, reports the norm only
}

TEST_CASE("train config json round trip and validation") {
  const auto t = quick_train();
  const auto back = TrainConfig::from_json(t.to_json());
  CHECK(back.to_json() == t.to_json());
  CHECK(TrainConfig::from_json(nlohmann::json::object()).to_json() == TrainConfig{}.to_json());
  TrainConfig bad;
  bad.finetune.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("pre-training: zero steps is the initialization, training lowers the loss") {
  const auto posts = fixture_posts(500);
  const auto texts = texts_of(posts);
  auto cfg = quick_train();
  const auto ec = small_encoder();
  emlm::MaskingConfig masking;
  const std::set<std::string> words{"sad", "angry", "afraid", "love", "happy"};

  cfg.pretrain.steps = 0;
  const auto zero = pretrain_mlm(texts, ec, cfg, masking, words);
  const auto init = initial_checkpoint(texts, ec, cfg.seed);
  CHECK(zero.tensors == init.tensors);
  CHECK(zero.tokenizer == init.tokenizer);

  cfg.pretrain.steps = 200;
  TrainLog log;
  const auto trained = pretrain_mlm(texts, ec, cfg, masking, words, nullptr, &log);
  REQUIRE(log.size() >= 2);
  CHECK(log.back().loss < log.front().loss);
  CHECK(trained.provenance.stage == "pretrain");

  const auto eval = evaluate_mlm(trained, texts, masking, words);
  const double chance = 1.0 / static_cast<double>(trained.tokenizer.size());
  CHECK(eval.accuracy > 5 * chance);
  CHECK(eval.loss < evaluate_mlm(init, texts, masking, words).loss);

  // continuing from a checkpoint keeps its vocabulary and records the parent
  cfg.pretrain.steps = 5;
  const auto cont = pretrain_mlm(texts, ec, cfg, masking, words, &trained);
  CHECK(cont.tokenizer == trained.tokenizer);
  CHECK(cont.provenance.parents == std::vector<std::string>{trained.content_hash()});

  // same seed, same result
  cfg.pretrain.steps = 10;
  CHECK(pretrain_mlm(texts, ec, cfg, masking, words).tensors == pretrain_mlm(texts, ec, cfg, masking, words).tensors);
}

TEST_CASE("linear probe freezes the encoder") {
  const auto posts = fixture_posts(600, 7, 0.0);
  const auto data = to_data(posts);
  auto cfg = quick_train();
  const auto base = initial_checkpoint(data.texts, small_encoder(), 5);

  cfg.probe.steps = 0;
  const auto untouched = linear_probe(base, data, cfg);
  const auto head0 = init_classifier_head(EncoderConfig::from_json(base.encoder), derive_seed(cfg.seed, 5));
  CHECK(untouched.tensors.at("head.w") == head0.at("head.w"));
  CHECK(untouched.tensors.at("head.b") == head0.at("head.b"));

  cfg.probe.steps = 400;
  const auto probed = linear_probe(base, data, cfg);
  for (const auto& [name, t] : base.tensors) {
    if (is_encoder_tensor(name)) {
      CAPTURE(name);
      CHECK(same_bytes(t, probed.tensors.at(name)));
    } else {
      CHECK_FALSE(probed.tensors.contains(name));
    }
  }
  CHECK(probed.provenance.parents == std::vector<std::string>{base.content_hash()});

  // frozen random features still carry some label signal
  const auto preds = predict(probed, data.texts);
  std::size_t correct = 0;
  std::array<std::size_t, kNumLabels> counts{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    correct += preds[i].label == data.labels[i] ? 1 : 0;
    ++counts[index_of(data.labels[i])];
  }
  const double majority_share = static_cast<double>(*std::max_element(counts.begin(), counts.end())) / preds.size();
  MESSAGE("probe train accuracy " << static_cast<double>(correct) / preds.size() << " majority share " << majority_share);
  CHECK(static_cast<double>(correct) / preds.size() > majority_share);

  CHECK_THROWS_AS(linear_probe(base, LabeledData{}, cfg), Error);
}

TEST_CASE("fine-tuning beats the majority baseline and predictions behave") {
  const auto posts = fixture_posts(2000, 99);
  LabeledData train, dev;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    auto& d = i % 5 == 0 ? dev : train;
    d.texts.push_back(posts[i].text);
    d.labels.push_back(posts[i].label);
  }
  auto cfg = quick_train();
  cfg.pretrain.steps = 100;
  cfg.finetune.epochs = 10;
  cfg.finetune.lr = 2e-3;
  const auto base = pretrain_mlm(train.texts, small_encoder(), cfg, emlm::MaskingConfig::uniform(), {});
  const auto probed = linear_probe(base, train, cfg);

  auto zero = cfg;
  zero.finetune.epochs = 0;
  CHECK(fine_tune(probed, train, &dev, zero) == probed);
  CHECK_THROWS_AS(fine_tune(base, train, &dev, cfg), Error);

  TrainLog log;
  const auto tuned = fine_tune(probed, train, &dev, cfg, &log);
  CHECK(tuned.provenance.stage == "finetune");
  for (const auto& [name, _] : tuned.tensors) CHECK_FALSE(is_mlm_tensor(name));
  const auto dev_entries = std::count_if(log.begin(), log.end(), [](const LogEntry& e) { return e.stage == "finetune-dev"; });
  CHECK(dev_entries == 10);

  const auto preds = predict(tuned, dev.texts);
  std::vector<EmotionLabel> got;
  for (const auto& p : preds) got.push_back(p.label);
  std::array<std::size_t, kNumLabels> counts{};
  for (auto l : train.labels) ++counts[index_of(l)];
  const auto majority = kAllLabels[std::max_element(counts.begin(), counts.end()) - counts.begin()];
  const std::vector<EmotionLabel> maj(dev.size(), majority);
  const double f1 = eval::macro_f1(dev.labels, got, kAllLabels).macro;
  const double f1_major = eval::macro_f1(dev.labels, maj, kAllLabels).macro;
  CHECK(f1 > f1_major);
  CHECK(f1 > f1_major + 20);
  MESSAGE("dev macro-F1 " << f1 << " vs majority " << f1_major);

  const Classifier clf(tuned);
  for (const auto& p : preds) {
    double s = 0;
    for (double v : p.probs) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(clf.predict_one(dev.texts[0]).probs == clf.predict_one(dev.texts[0]).probs);
  const auto empty = clf.predict_one("   ");
  CHECK(empty.degenerate);
  for (double v : empty.probs) CHECK(v == doctest::Approx(0.2));

  const auto& markers = fixture::marker_words();
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const std::string text = "i feel so " + markers[k][0] + " about the weekend today";
    CAPTURE(text);
    CHECK(clf.predict_one(text).label == kAllLabels[k]);
  }
}

TEST_CASE("argmax ties go to the earlier label") {
  CHECK(argmax_label({0.2, 0.2, 0.2, 0.2, 0.2}) == EmotionLabel::Sadness);
  CHECK(argmax_label({0.1, 0.3, 0.3, 0.2, 0.1}) == EmotionLabel::Anger);
  CHECK(argmax_label({0.1, 0.1, 0.1, 0.1, 0.6}) == EmotionLabel::Happiness);
}
