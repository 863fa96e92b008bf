#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "emoid/common.hpp"
#include "emoid/lexicon.hpp"

namespace emoid::baselines {

// ---- lexicon dictionary, one-vs-rest ----

struct DictionaryModel {
  lexicon::CategoryMap cmap;
  std::map<std::string, double> base;  // category -> mean dev score

  nlohmann::json to_json() const;
  static DictionaryModel from_json(const nlohmann::json& j);
};

DictionaryModel fit_base_frequencies(std::span<const std::string> dev_texts, const lexicon::EmotionLexicon& lex,
                                     const lexicon::CategoryMap& cmap);

/// Quotient rule: score/base > 1, or score > 0 when base is 0.
bool quotient_present(double score, double base);

/// Present iff any category mapped to `label` passes the quotient rule.
/// Labels without a mapped category are never present.
bool dict_predict(std::string_view text, EmotionLabel label, const DictionaryModel& model,
                  const lexicon::EmotionLexicon& lex);

/// Labels that have at least one category in the map.
std::vector<EmotionLabel> dict_labels(const DictionaryModel& model);

/// Binary F1 (percent) of present/absent against gold == label, for each covered label.
std::map<EmotionLabel, double> dict_one_vs_rest_f1(std::span<const std::string> texts,
                                                   std::span<const EmotionLabel> golds, const DictionaryModel& model,
                                                   const lexicon::EmotionLexicon& lex);

// ---- NBSVM ----

/// r = log((p/|p|_1) / (q/|q|_1)) with p = alpha + pos, q = alpha + neg.
std::vector<double> nb_log_count_ratio(std::span<const double> pos_counts, std::span<const double> neg_counts,
                                       double alpha = 1.0);

struct NbsvmConfig {
  std::size_t vocab_size = 64000;
  double beta = 0.25;   // interpolation toward the mean weight magnitude
  double alpha = 1.0;   // count smoothing
  double C = 1.0;       // SVM regularization
  std::size_t max_iter = 1000;
  double tol = 0.1;
  std::uint64_t seed = 7;
};

struct NbsvmModel {
  std::vector<std::string> vocab;
  std::array<bool, kNumLabels> trained{};
  std::array<std::vector<double>, kNumLabels> r;  // log-count ratios
  std::array<std::vector<double>, kNumLabels> w;  // interpolated weights
  std::array<double, kNumLabels> b{};
  double beta = 0.25;

  std::unordered_map<std::string, std::size_t> index;
  void rebuild_index();
};

/// Unique in-vocabulary feature ids of a text, ascending.
std::vector<std::size_t> nbsvm_features(const NbsvmModel& model, std::string_view text);

/// Top `vocab_size` unigrams by count, ties broken lexicographically.
std::vector<std::string> build_unigram_vocab(std::span<const std::string> texts, std::size_t vocab_size);

NbsvmModel nbsvm_train(std::span<const std::string> texts, std::span<const EmotionLabel> labels,
                       const NbsvmConfig& cfg = {});

/// Per-label decision values; untrained labels get -infinity.
std::array<double, kNumLabels> nbsvm_scores(const NbsvmModel& model, std::string_view text);
EmotionLabel nbsvm_predict(const NbsvmModel& model, std::string_view text);

/// `manifest.json` + `weights.bin` (float64, little-endian).
void save_nbsvm(const std::string& dir, const NbsvmModel& model);
NbsvmModel load_nbsvm(const std::string& dir);

}  // namespace emoid::baselines
