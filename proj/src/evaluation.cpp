#include "emoid/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "emoid/jsonl.hpp"
#include "emoid/rng.hpp"
#include "emoid/text.hpp"

namespace emoid::eval {

using nlohmann::json;

namespace {

// Label ids mapped to dense slots of the declared label set.
struct Slots {
  std::array<int, kNumLabels> slot;
  std::size_t k = 0;

  explicit Slots(std::span<const EmotionLabel> label_set) {
    slot.fill(-1);
    for (auto l : label_set) {
      if (slot[index_of(l)] < 0) slot[index_of(l)] = static_cast<int>(k++);
    }
    if (k == 0) throw Error("label set is empty");
  }
  std::size_t of(EmotionLabel l) const {
    const int s = slot[index_of(l)];
    if (s < 0) throw Error("label " + std::string(label_name(l)) + " is outside the declared label set");
    return static_cast<std::size_t>(s);
  }
};

double f1_percent(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
  return denom == 0.0 ? 0.0 : 100.0 * 2.0 * static_cast<double>(tp) / denom;
}

// F1 per slot plus macro (last entry) from slot-encoded labels over `idx`.
// For a resample (`idx` set) a class that never occurs in it, as gold or as
// prediction, is NaN and left out of the macro mean.
std::vector<double> scores_over(const std::vector<std::size_t>& g, const std::vector<std::size_t>& p, std::size_t k,
                                const std::vector<std::size_t>* idx) {
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  const std::size_t n = idx != nullptr ? idx->size() : g.size();
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = idx != nullptr ? (*idx)[t] : t;
    if (g[i] == p[i]) {
      ++tp[g[i]];
    } else {
      ++fp[p[i]];
      ++fn[g[i]];
    }
  }
  std::vector<double> out(k + 1, 0.0);
  std::size_t counted = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (idx != nullptr && tp[c] + fp[c] + fn[c] == 0) {
      out[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out[c] = f1_percent(tp[c], fp[c], fn[c]);
    out[k] += out[c];
    ++counted;
  }
  out[k] = counted == 0 ? std::numeric_limits<double>::quiet_NaN() : out[k] / static_cast<double>(counted);
  return out;
}

std::string fmt2(double v) { return fmt::format("{:.2f}", v); }

const std::set<std::string>& builtin_emotion_words() {
  static const std::set<std::string> words{
      "afraid",     "alarmed",   "angry",     "annoyed",   "anxious",   "ashamed",    "bitter",   "content",
      "delighted",  "depressed", "desperate", "devastated", "disgusted", "disappointed", "embarrassed", "enraged",
      "excited",    "fear",      "fearful",   "frightened", "frustrated", "furious",   "glad",     "grateful",
      "grief",      "guilty",    "happy",     "heartbroken", "hopeless", "horrified",  "humiliated", "hurt",
      "irritated",  "joy",       "joyful",    "lonely",    "mad",       "miserable",  "nervous",  "outraged",
      "panicked",   "pleased",   "proud",     "relieved",  "resentful", "sad",        "scared",   "shame",
      "shocked",    "sorrowful", "terrified", "thrilled",  "unhappy",   "upset",      "worried"};
  return words;
}

}  // namespace

F1Scores macro_f1(std::span<const EmotionLabel> golds, std::span<const EmotionLabel> preds,
                  std::span<const EmotionLabel> label_set) {
  if (golds.size() != preds.size()) throw Error("golds and predictions differ in length");
  if (golds.empty()) throw Error("cannot score an empty prediction set");
  const Slots slots(label_set);
  std::vector<std::size_t> g(golds.size()), p(preds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) {
    g[i] = slots.of(golds[i]);
    p[i] = slots.of(preds[i]);
  }
  const auto s = scores_over(g, p, slots.k, nullptr);
  F1Scores out;
  for (auto l : label_set) out.per_class[l] = s[slots.of(l)];
  out.macro = s[slots.k];
  return out;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b) {
  Rng rng(derive_seed(seed, b));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.below(n);
  return idx;
}

double percentile(std::vector<double>& values, double q) {
  if (values.empty()) throw Error("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_ci(std::span<const EmotionLabel> golds, std::span<const EmotionLabel> preds,
                             std::span<const EmotionLabel> label_set, std::size_t replicates, double level,
                             std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0,1)");
  BootstrapResult r;
  r.point = macro_f1(golds, preds, label_set);
  r.replicates = replicates;
  const Slots slots(label_set);
  const std::size_t n = golds.size(), k = slots.k;
  std::vector<std::size_t> g(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = slots.of(golds[i]);
    p[i] = slots.of(preds[i]);
  }

  // samples[metric][replicate]; metric k is the macro score.
  std::vector<std::vector<double>> samples(k + 1, std::vector<double>(replicates));
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < replicates; ++b) {
    const auto idx = bootstrap_indices(n, seed, b);
    const auto s = scores_over(g, p, k, &idx);
    for (std::size_t m = 0; m <= k; ++m) samples[m][b] = s[m];
  }

  const double lo_q = (1.0 - level) / 2.0, hi_q = 1.0 - lo_q;
  auto interval = [&](std::vector<double>& all, double point) {
    std::vector<double> v;
    for (double x : all)
      if (!std::isnan(x)) v.push_back(x);
    if (v.empty()) return Interval{point, point};
    // Percentile bounds can exclude the point estimate on skewed samples;
    // the reported interval is widened to contain it.
    return Interval{std::min(percentile(v, lo_q), point), std::max(percentile(v, hi_q), point)};
  };
  r.macro = interval(samples[k], r.point.macro);
  for (auto l : label_set) r.per_class[l] = interval(samples[slots.of(l)], r.point.per_class.at(l));
  return r;
}

std::optional<EmotionLabel> map_ood_labels(std::string_view label) {
  std::string s = to_lower(label);
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if (s == "sadness") return EmotionLabel::Sadness;
  if (s == "anger") return EmotionLabel::Anger;
  if (s == "fear") return EmotionLabel::Fear;
  if (s == "happiness" || s == "joy" || s == "affection") return EmotionLabel::Happiness;
  return std::nullopt;
}

EnisearResult prepare_enisear(std::string_view input, const lexicon::EmotionLexicon* lex) {
  EnisearResult out{std::string(input), true};
  if (input.find("<mask>") != std::string_view::npos) return out;
  static const std::regex frame(R"(^\s*I\s+felt\s+(.+?)\s+(when|because)\b)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(out.text, m, frame)) {
    out.matched = false;
    return out;
  }
  const auto span_begin = static_cast<std::size_t>(m.position(1));
  const std::string span = m.str(1);
  const auto words = text::lexical_words(span);
  if (words.empty()) {
    out.matched = false;
    return out;
  }
  std::size_t pick = words.size() - 1;
  if (words.size() > 1) {
    for (std::size_t i = words.size(); i-- > 0;) {
      const auto& w = words[i].word;
      const bool known = builtin_emotion_words().contains(w) ||
                         (lex != nullptr && lex->categories_of(w) != nullptr);
      if (known) {
        pick = i;
        break;
      }
    }
  }
  // Replace only the word core; surrounding punctuation stays.
  const auto& w = words[pick];
  const std::string_view raw(span.data() + w.begin, w.end - w.begin);
  std::size_t core = 0;
  while (core < raw.size() && std::ispunct(static_cast<unsigned char>(raw[core]))) ++core;
  std::size_t core_end = raw.size();
  while (core_end > core && std::ispunct(static_cast<unsigned char>(raw[core_end - 1]))) --core_end;
  out.text.replace(span_begin + w.begin + core, core_end - core, "<mask>");
  return out;
}

std::map<std::string, double> average_rank(const std::map<std::string, std::map<std::string, double>>& scores) {
  std::set<std::string> datasets;
  for (const auto& [_, row] : scores) {
    for (const auto& [d, __] : row) datasets.insert(d);
  }
  for (const auto& [model, row] : scores) {
    for (const auto& d : datasets) {
      if (!row.contains(d)) throw Error("missing score for model '" + model + "' on dataset '" + d + "'");
    }
  }
  std::map<std::string, double> total;
  for (const auto& [model, _] : scores) total[model] = 0.0;
  if (datasets.empty()) return total;
  for (const auto& d : datasets) {
    std::vector<std::pair<double, std::string>> col;
    for (const auto& [model, row] : scores) col.emplace_back(row.at(d), model);
    std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < col.size();) {
      std::size_t j = i;
      while (j < col.size() && col[j].first == col[i].first) ++j;
      const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
      for (std::size_t t = i; t < j; ++t) total[col[t].second] += rank;
      i = j;
    }
  }
  for (auto& [_, v] : total) v /= static_cast<double>(datasets.size());
  return total;
}

std::vector<LabeledPrediction> sample_errors(std::span<const LabeledPrediction> predictions, std::size_t per_label,
                                             std::uint64_t seed) {
  std::vector<LabeledPrediction> out;
  for (auto l : kAllLabels) {
    std::vector<std::size_t> wrong;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (predictions[i].gold == l && predictions[i].pred != l) wrong.push_back(i);
    }
    if (wrong.size() > per_label) {
      Rng rng(derive_seed(seed, index_of(l)));
      rng.shuffle(wrong);
      wrong.resize(per_label);
      std::sort(wrong.begin(), wrong.end());
    }
    for (auto i : wrong) out.push_back(predictions[i]);
  }
  return out;
}

EvalReport evaluate(std::string dataset, std::string model, std::span<const EmotionLabel> golds,
                    std::span<const EmotionLabel> preds, std::span<const EmotionLabel> label_set,
                    std::size_t replicates, std::uint64_t seed) {
  EvalReport r;
  r.dataset = std::move(dataset);
  r.model = std::move(model);
  r.n = golds.size();
  r.label_set.assign(label_set.begin(), label_set.end());
  r.scores = bootstrap_ci(golds, preds, label_set, replicates, 0.95, seed);
  return r;
}

json report_json(const EvalReport& r) {
  json per = json::object();
  for (auto l : r.label_set) {
    const auto& ci = r.scores.per_class.at(l);
    per[std::string(label_name(l))] = {{"f1", r.scores.point.per_class.at(l)}, {"low", ci.low}, {"high", ci.high}};
  }
  json labels = json::array();
  for (auto l : r.label_set) labels.push_back(label_name(l));
  return json{{"dataset", r.dataset},
              {"model", r.model},
              {"n", r.n},
              {"labels", labels},
              {"replicates", r.scores.replicates},
              {"macro_f1", {{"f1", r.scores.point.macro}, {"low", r.scores.macro.low}, {"high", r.scores.macro.high}}},
              {"per_class", per}};
}

namespace {

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

std::string macro_table_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "model,dataset,n,macro_f1,ci_low,ci_high\n";
  for (const auto& r : reports) {
    out << r.model << ',' << r.dataset << ',' << r.n << ',' << fmt2(r.scores.point.macro) << ','
        << fmt2(r.scores.macro.low) << ',' << fmt2(r.scores.macro.high) << '\n';
  }
  return out.str();
}

std::string macro_table_markdown(std::span<const EvalReport> reports) {
  std::vector<std::string> models, datasets;
  for (const auto& r : reports) {
    push_unique(models, r.model);
    push_unique(datasets, r.dataset);
  }
  std::ostringstream out;
  out << "| Model |";
  for (const auto& d : datasets) out << ' ' << d << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < datasets.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& m : models) {
    out << "| " << m << " |";
    for (const auto& d : datasets) {
      const auto it = std::find_if(reports.begin(), reports.end(),
                                   [&](const EvalReport& r) { return r.model == m && r.dataset == d; });
      if (it == reports.end()) {
        out << " - |";
      } else {
        out << ' ' << fmt2(it->scores.point.macro) << " [" << fmt2(it->scores.macro.low) << ", "
            << fmt2(it->scores.macro.high) << "] |";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string per_class_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "dataset,model,label,f1,ci_low,ci_high\n";
  for (const auto& r : reports) {
    for (auto l : r.label_set) {
      const auto& ci = r.scores.per_class.at(l);
      out << r.dataset << ',' << r.model << ',' << label_name(l) << ',' << fmt2(r.scores.point.per_class.at(l)) << ','
          << fmt2(ci.low) << ',' << fmt2(ci.high) << '\n';
    }
  }
  return out.str();
}

std::string rank_table_markdown(const std::map<std::string, std::map<std::string, double>>& scores,
                                const std::map<std::string, double>& ranks) {
  std::set<std::string> datasets;
  for (const auto& [_, row] : scores) {
    for (const auto& [d, __] : row) datasets.insert(d);
  }
  std::ostringstream out;
  out << "| Model |";
  for (const auto& d : datasets) out << ' ' << d << " |";
  out << " Avg. rank |\n|---|";
  for (std::size_t i = 0; i <= datasets.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& [model, row] : scores) {
    out << "| " << model << " |";
    for (const auto& d : datasets) out << ' ' << fmt2(row.at(d)) << " |";
    out << ' ' << fmt2(ranks.at(model)) << " |\n";
  }
  return out.str();
}

std::vector<LabeledPrediction> read_predictions_jsonl(const std::string& path) {
  std::vector<LabeledPrediction> out;
  for (const auto& j : jsonl::read_all(path)) {
    LabeledPrediction p;
    p.id = j.value("id", "");
    const auto g = parse_label(j.at("gold").get<std::string>());
    const auto pr = parse_label(j.at("pred").get<std::string>());
    if (!g || !pr) throw Error(path + ": unknown label in prediction record " + p.id);
    p.gold = *g;
    p.pred = *pr;
    p.dataset = j.value("dataset", "");
    p.text = j.value("text", "");
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions_jsonl(const std::string& path, std::span<const LabeledPrediction> preds) {
  std::vector<json> rows;
  rows.reserve(preds.size());
  for (const auto& p : preds) {
    rows.push_back({{"id", p.id},
                    {"gold", label_name(p.gold)},
                    {"pred", label_name(p.pred)},
                    {"dataset", p.dataset},
                    {"text", p.text}});
  }
  jsonl::write_all(path, rows);
}

}  // namespace emoid::eval
