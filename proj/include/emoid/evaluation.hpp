#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emoid/common.hpp"
#include "emoid/lexicon.hpp"

namespace emoid::eval {

struct F1Scores {
  std::map<EmotionLabel, double> per_class;  // percent
  double macro = 0.0;                        // percent
};

/// Per-class F1 and their unweighted mean over `label_set`, in percent.
/// A class with P+R = 0 scores 0.
F1Scores macro_f1(std::span<const EmotionLabel> golds, std::span<const EmotionLabel> preds,
                  std::span<const EmotionLabel> label_set);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct BootstrapResult {
  F1Scores point;
  Interval macro;
  std::map<EmotionLabel, Interval> per_class;
  std::size_t replicates = 0;
};

/// Percentile bootstrap over instance resamples. Replicate b draws its
/// indices from an Rng seeded with derive_seed(seed, b), so the result does
/// not depend on the thread count. Classes missing from a resample (no gold,
/// no prediction) are left out of that replicate, so a perfect predictor
/// always gets [100, 100].
BootstrapResult bootstrap_ci(std::span<const EmotionLabel> golds, std::span<const EmotionLabel> preds,
                             std::span<const EmotionLabel> label_set, std::size_t replicates = 10000,
                             double level = 0.95, std::uint64_t seed = 0);

/// Indices drawn for replicate `b`; exposed so tests can enumerate resamples.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b);

/// Linear-interpolated percentile of `values` (sorted in place), q in [0,1].
double percentile(std::vector<double>& values, double q);

/// Four-class out-of-domain label mapping; nullopt excludes the instance.
std::optional<EmotionLabel> map_ood_labels(std::string_view label);

struct EnisearResult {
  std::string text;
  bool matched = true;  // false: no template match, text passed through
};

/// Replaces the emotion word of "I felt <emotion> when/because <situation>"
/// with `<mask>`. With modifiers in the span, the last word that is a known
/// emotion word (built-in list or `lex`) is replaced.
EnisearResult prepare_enisear(std::string_view text, const lexicon::EmotionLexicon* lex = nullptr);

/// scores[model][dataset]; higher is better. Rank 1 = best, ties share the
/// mean rank. Returns the per-model average rank over datasets.
std::map<std::string, double> average_rank(const std::map<std::string, std::map<std::string, double>>& scores);

struct LabeledPrediction {
  std::string id;
  EmotionLabel gold = EmotionLabel::Sadness;
  EmotionLabel pred = EmotionLabel::Sadness;
  std::string dataset;
  std::string text;

  bool operator==(const LabeledPrediction&) const = default;
};

/// Up to `per_label` misclassified instances per gold label, sampled
/// uniformly without replacement. Output is grouped by label in the fixed
/// order, each group in input order.
std::vector<LabeledPrediction> sample_errors(std::span<const LabeledPrediction> predictions, std::size_t per_label,
                                             std::uint64_t seed);

struct EvalReport {
  std::string dataset;
  std::string model;
  std::size_t n = 0;
  std::vector<EmotionLabel> label_set;
  BootstrapResult scores;
};

EvalReport evaluate(std::string dataset, std::string model, std::span<const EmotionLabel> golds,
                    std::span<const EmotionLabel> preds, std::span<const EmotionLabel> label_set,
                    std::size_t replicates, std::uint64_t seed);

nlohmann::json report_json(const EvalReport& r);

/// Macro-F1 table (rows = models, columns = datasets) with CIs, as CSV and Markdown.
std::string macro_table_csv(std::span<const EvalReport> reports);
std::string macro_table_markdown(std::span<const EvalReport> reports);
/// One row per (dataset, model, label) with F1 and CI, for bar plots.
std::string per_class_csv(std::span<const EvalReport> reports);
std::string rank_table_markdown(const std::map<std::string, std::map<std::string, double>>& scores,
                                const std::map<std::string, double>& ranks);

std::vector<LabeledPrediction> read_predictions_jsonl(const std::string& path);
void write_predictions_jsonl(const std::string& path, std::span<const LabeledPrediction> preds);

}  // namespace emoid::eval
