#include "emoid/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "emoid/jsonl.hpp"
#include "emoid/rng.hpp"
#include "emoid/text.hpp"

namespace emoid::baselines {

static_assert(std::endian::native == std::endian::little, "weight blobs are written in host order");

using nlohmann::json;

// ---- dictionary ----

json DictionaryModel::to_json() const {
  json cm = json::object();
  for (const auto& [c, l] : cmap.entries()) cm[c] = std::string(label_name(l));
  return json{{"cmap", cm}, {"base", base}};
}

DictionaryModel DictionaryModel::from_json(const json& j) {
  DictionaryModel m;
  for (const auto& [c, v] : j.at("cmap").items()) {
    const auto l = parse_label(v.get<std::string>());
    if (!l) throw Error("dictionary model: unknown label for category '" + c + "'");
    m.cmap.add(c, *l);
  }
  for (const auto& [c, v] : j.at("base").items()) m.base[c] = v.get<double>();
  return m;
}

DictionaryModel fit_base_frequencies(std::span<const std::string> dev_texts, const lexicon::EmotionLexicon& lex,
                                     const lexicon::CategoryMap& cmap) {
  if (dev_texts.empty()) throw Error("base frequencies need a non-empty dev set");
  DictionaryModel m;
  m.cmap = cmap;
  for (const auto& [cat, _] : cmap.entries()) {
    double sum = 0.0;
    for (const auto& t : dev_texts) sum += lexicon::category_score(t, cat, lex);
    m.base[cat] = sum / static_cast<double>(dev_texts.size());
  }
  return m;
}

bool quotient_present(double score, double base) {
  if (base <= 0.0) return score > 0.0;
  return score / base > 1.0;
}

bool dict_predict(std::string_view text, EmotionLabel label, const DictionaryModel& model,
                  const lexicon::EmotionLexicon& lex) {
  for (const auto& cat : model.cmap.categories_for(label)) {
    const auto it = model.base.find(cat);
    if (it == model.base.end()) throw Error("dictionary model has no base frequency for '" + cat + "'");
    if (quotient_present(lexicon::category_score(text, cat, lex), it->second)) return true;
  }
  return false;
}

std::vector<EmotionLabel> dict_labels(const DictionaryModel& model) {
  std::vector<EmotionLabel> out;
  for (auto l : kAllLabels) {
    if (!model.cmap.categories_for(l).empty()) out.push_back(l);
  }
  return out;
}

std::map<EmotionLabel, double> dict_one_vs_rest_f1(std::span<const std::string> texts,
                                                   std::span<const EmotionLabel> golds, const DictionaryModel& model,
                                                   const lexicon::EmotionLexicon& lex) {
  if (texts.size() != golds.size()) throw Error("texts and gold labels differ in length");
  std::map<EmotionLabel, double> out;
  for (auto l : dict_labels(model)) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const bool pred = dict_predict(texts[i], l, model, lex);
      const bool gold = golds[i] == l;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
    out[l] = denom == 0.0 ? 0.0 : 100.0 * 2.0 * static_cast<double>(tp) / denom;
  }
  return out;
}

// ---- NBSVM ----

std::vector<double> nb_log_count_ratio(std::span<const double> pos_counts, std::span<const double> neg_counts,
                                       double alpha) {
  if (pos_counts.size() != neg_counts.size()) throw Error("count vectors differ in length");
  if (!(alpha > 0.0)) throw Error("smoothing alpha must be positive");
  const std::size_t V = pos_counts.size();
  double p1 = 0.0, q1 = 0.0;
  for (std::size_t j = 0; j < V; ++j) {
    p1 += alpha + pos_counts[j];
    q1 += alpha + neg_counts[j];
  }
  std::vector<double> r(V);
  for (std::size_t j = 0; j < V; ++j) r[j] = std::log(((alpha + pos_counts[j]) / p1) / ((alpha + neg_counts[j]) / q1));
  return r;
}

namespace {

std::vector<std::string> unigrams(std::string_view text) {
  std::vector<std::string> out;
  for (auto& w : text::lexical_words(text)) out.push_back(std::move(w.word));
  return out;
}

struct Doc {
  std::vector<std::size_t> features;
  double y = 0.0;
};

// L2-regularized squared-hinge SVM, dual coordinate descent. The bias is a
// constant feature 1 and is regularized like the other weights.
void train_svm(const std::vector<Doc>& docs, const std::vector<double>& r, const NbsvmConfig& cfg, Rng& rng,
               std::vector<double>& w, double& b) {
  const std::size_t n = docs.size();
  w.assign(r.size(), 0.0);
  b = 0.0;
  const double diag = 1.0 / (2.0 * cfg.C);
  std::vector<double> alpha(n, 0.0), qii(n, diag + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : docs[i].features) qii[i] += r[j] * r[j];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t iter = 0; iter < cfg.max_iter; ++iter) {
    rng.shuffle(order);
    double pg_max = -std::numeric_limits<double>::infinity(), pg_min = std::numeric_limits<double>::infinity();
    for (auto i : order) {
      const auto& d = docs[i];
      double wx = b;
      for (auto j : d.features) wx += w[j] * r[j];
      const double G = d.y * wx - 1.0 + diag * alpha[i];
      const double PG = alpha[i] == 0.0 ? std::min(G, 0.0) : G;
      pg_max = std::max(pg_max, PG);
      pg_min = std::min(pg_min, PG);
      if (std::abs(PG) < 1e-12) continue;
      const double old = alpha[i];
      alpha[i] = std::max(old - G / qii[i], 0.0);
      const double delta = (alpha[i] - old) * d.y;
      for (auto j : d.features) w[j] += delta * r[j];
      b += delta;
    }
    if (pg_max - pg_min < cfg.tol) break;
  }
}

}  // namespace

void NbsvmModel::rebuild_index() {
  index.clear();
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
}

std::vector<std::size_t> nbsvm_features(const NbsvmModel& model, std::string_view text) {
  std::set<std::size_t> ids;
  for (const auto& u : unigrams(text)) {
    const auto it = model.index.find(u);
    if (it != model.index.end()) ids.insert(it->second);
  }
  return {ids.begin(), ids.end()};
}

std::vector<std::string> build_unigram_vocab(std::span<const std::string> texts, std::size_t vocab_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& u : unigrams(t)) ++counts[std::move(u)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > vocab_size) ranked.resize(vocab_size);
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [w, _] : ranked) out.push_back(std::move(w));
  return out;
}

NbsvmModel nbsvm_train(std::span<const std::string> texts, std::span<const EmotionLabel> labels,
                       const NbsvmConfig& cfg) {
  if (texts.size() != labels.size()) throw Error("texts and labels differ in length");
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw Error("NBSVM beta must lie in [0,1]");
  if (!(cfg.C > 0.0)) throw Error("NBSVM C must be positive");
  std::array<std::size_t, kNumLabels> counts{};
  for (auto l : labels) ++counts[index_of(l)];
  std::size_t present = 0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (counts[k] == 1)
      throw Error("label " + std::string(label_name(kAllLabels[k])) + " has fewer than 2 training examples");
    present += counts[k] > 0;
  }
  if (present < 2) throw Error("NBSVM needs at least 2 labels");

  NbsvmModel m;
  m.beta = cfg.beta;
  m.vocab = build_unigram_vocab(texts, cfg.vocab_size);
  m.rebuild_index();
  const std::size_t V = m.vocab.size();

  std::vector<Doc> base(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) base[i].features = nbsvm_features(m, texts[i]);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (counts[k] == 0) continue;
    std::vector<Doc> docs = base;
    std::vector<double> pos(V, 0.0), neg(V, 0.0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const bool is_pos = index_of(labels[i]) == k;
      docs[i].y = is_pos ? 1.0 : -1.0;
      for (auto j : docs[i].features) (is_pos ? pos : neg)[j] += 1.0;
    }
    auto r = nb_log_count_ratio(pos, neg, cfg.alpha);
    Rng rng(derive_seed(cfg.seed, k));
    std::vector<double> w;
    double b = 0.0;
    train_svm(docs, r, cfg, rng, w, b);
    double mean_mag = 0.0;
    for (double x : w) mean_mag += std::abs(x);
    mean_mag = V > 0 ? mean_mag / static_cast<double>(V) : 0.0;
    for (double& x : w) x = cfg.beta * mean_mag + (1.0 - cfg.beta) * x;
    m.r[k] = std::move(r);
    m.w[k] = std::move(w);
    m.b[k] = b;
    m.trained[k] = true;
  }
  return m;
}

std::array<double, kNumLabels> nbsvm_scores(const NbsvmModel& model, std::string_view text) {
  std::array<double, kNumLabels> s;
  s.fill(-std::numeric_limits<double>::infinity());
  const auto feats = nbsvm_features(model, text);
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (!model.trained[k]) continue;
    double acc = model.b[k];
    for (auto j : feats) acc += model.w[k][j] * model.r[k][j];
    s[k] = acc;
  }
  return s;
}

EmotionLabel nbsvm_predict(const NbsvmModel& model, std::string_view text) {
  const auto s = nbsvm_scores(model, text);
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (s[k] > s[best]) best = k;
  }
  return kAllLabels[best];
}

void save_nbsvm(const std::string& dir, const NbsvmModel& model) {
  std::filesystem::create_directories(dir);
  json labels = json::array();
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (!model.trained[k]) continue;
    labels.push_back({{"label", label_name(kAllLabels[k])}, {"bias", model.b[k]}});
  }
  jsonl::write_json(dir + "/manifest.json",
                    json{{"format", "emoid-nbsvm-v1"}, {"beta", model.beta}, {"vocab", model.vocab},
                         {"labels", labels}, {"blob", "weights.bin"}, {"layout", "per label: r[V] then w[V], float64"}});
  std::ofstream out(dir + "/weights.bin", std::ios::binary);
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (!model.trained[k]) continue;
    out.write(reinterpret_cast<const char*>(model.r[k].data()), static_cast<std::streamsize>(model.r[k].size() * 8));
    out.write(reinterpret_cast<const char*>(model.w[k].data()), static_cast<std::streamsize>(model.w[k].size() * 8));
  }
  if (!out) throw Error("cannot write " + dir + "/weights.bin");
}

NbsvmModel load_nbsvm(const std::string& dir) {
  const auto j = jsonl::read_json(dir + "/manifest.json");
  if (j.value("format", "") != "emoid-nbsvm-v1") throw Error(dir + ": not an NBSVM model");
  NbsvmModel m;
  m.beta = j.at("beta").get<double>();
  m.vocab = j.at("vocab").get<std::vector<std::string>>();
  m.rebuild_index();
  const std::size_t V = m.vocab.size();
  std::ifstream in(dir + "/weights.bin", std::ios::binary);
  if (!in) throw Error("cannot read " + dir + "/weights.bin");
  for (const auto& e : j.at("labels")) {
    const auto l = parse_label(e.at("label").get<std::string>());
    if (!l) throw Error(dir + ": unknown label in manifest");
    const auto k = index_of(*l);
    m.trained[k] = true;
    m.b[k] = e.at("bias").get<double>();
    m.r[k].resize(V);
    m.w[k].resize(V);
    in.read(reinterpret_cast<char*>(m.r[k].data()), static_cast<std::streamsize>(V * 8));
    in.read(reinterpret_cast<char*>(m.w[k].data()), static_cast<std::streamsize>(V * 8));
    if (!in) throw Error(dir + "/weights.bin is truncated");
  }
  return m;
}

}  // namespace emoid::baselines
