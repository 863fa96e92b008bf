#include "emoid/corpus.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "emoid/jsonl.hpp"
#include "emoid/text.hpp"

namespace emoid::corpus {

using jsonl::Json;

TagMapping::TagMapping() {
  using L = EmotionLabel;
  for (auto t : {"lonely", "sad", "miserable"}) add(t, L::Sadness);
  for (auto t : {"angry", "annoyed", "frustrated", "furious"}) add(t, L::Anger);
  for (auto t : {"anxious", "stressed", "afraid", "nervous", "worried"}) add(t, L::Fear);
  for (auto t : {"affectionate", "loving", "caring", "adoring", "cuddly", "supportive",
                 "passionate", "infatuated"})
    add(t, L::Affection);
  for (auto t : {"happy", "excited"}) add(t, L::Happiness);
}

TagMapping TagMapping::empty() { return TagMapping(NoDefaults{}); }

TagMapping TagMapping::from_json_file(const std::string& path) {
  const Json j = jsonl::read_json(path);
  if (!j.is_object()) throw Error(path + ": tag mapping must be a JSON object");
  TagMapping m = empty();
  for (const auto& [tag, value] : j.items()) {
    const auto label = value.is_string() ? parse_label(value.get<std::string>()) : std::nullopt;
    if (!label) throw Error(path + ": tag '" + tag + "' maps to an unknown label");
    m.add(tag, *label);
  }
  return m;
}

void TagMapping::add(std::string_view tag, EmotionLabel label) {
  const std::string key = to_lower(tag);
  const auto [it, inserted] = map_.emplace(key, label);
  if (!inserted && it->second != label) {
    throw Error("tag '" + key + "' mapped to both " + std::string(label_name(it->second)) +
                " and " + std::string(label_name(label)));
  }
}

std::optional<EmotionLabel> TagMapping::lookup(std::string_view tag) const {
  const auto it = map_.find(to_lower(tag));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

std::optional<EmotionLabel> map_tag(std::string_view tag, const TagMapping& mapping) {
  return mapping.lookup(tag);
}

bool is_english(std::string_view text, const LanguageDetectorSet& detectors) {
  int votes = 0;
  for (const auto& d : detectors.detectors) {
    try {
      if (d.is_english && d.is_english(text)) ++votes;
    } catch (const std::exception& e) {
      spdlog::warn("language detector '{}' failed: {}", d.name, e.what());
    }
  }
  return votes >= 2;
}

PlaceholderPatterns PlaceholderPatterns::defaults() {
  PlaceholderPatterns p;
  p.patterns.emplace_back(R"(\[LINK\])", std::regex::icase);
  p.patterns.emplace_back(R"(\[USER\])", std::regex::icase);
  p.patterns.emplace_back(R"(https?://\S+)", std::regex::icase);
  p.patterns.emplace_back(R"(@\w+)");
  return p;
}

bool PlaceholderPatterns::matches(std::string_view token) const {
  for (const auto& re : patterns) {
    if (std::regex_match(token.begin(), token.end(), re)) return true;
  }
  return false;
}

std::size_t content_word_count(std::string_view text, const PlaceholderPatterns& patterns) {
  std::size_t n = 0;
  for (auto tok : text::split_whitespace(text)) {
    if (!patterns.matches(tok)) ++n;
  }
  return n;
}

bool passes_length_filter(std::string_view text, const PlaceholderPatterns& patterns) {
  return content_word_count(text, patterns) >= 3;
}

std::vector<FlaggedPost> flag_duplicates_and_memes(std::vector<RawPost> posts, std::size_t meme_k) {
  std::unordered_map<std::string_view, std::vector<std::size_t>> by_text;
  for (std::size_t i = 0; i < posts.size(); ++i) by_text[posts[i].text].push_back(i);

  std::vector<DropReason> reason(posts.size(), DropReason::Kept);
  for (const auto& [txt, idx] : by_text) {
    std::unordered_set<std::string_view> users;
    for (auto i : idx) users.insert(posts[i].user_id);
    if (users.size() >= meme_k) {
      for (auto i : idx) reason[i] = DropReason::Meme;
      continue;
    }
    const auto earliest = *std::min_element(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (posts[a].timestamp != posts[b].timestamp) return posts[a].timestamp < posts[b].timestamp;
      return posts[a].id < posts[b].id;
    });
    for (auto i : idx) {
      if (i != earliest) reason[i] = DropReason::Duplicate;
    }
  }

  std::vector<FlaggedPost> out;
  out.reserve(posts.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    out.push_back({std::move(posts[i]), reason[i] == DropReason::Kept, reason[i]});
  }
  return out;
}

namespace {

enum class Stage : std::uint8_t { Pass, Malformed, Language, Tag, Length };

struct Staged {
  Stage stage = Stage::Pass;
  std::optional<EmotionLabel> label;
  std::string text;
};

PipelineResult finish(const std::vector<RawPost>& raw, std::vector<bool> malformed,
                      const TagMapping& mapping, const LanguageDetectorSet& detectors,
                      const PipelineConfig& config) {
  PipelineResult result;
  result.stats.input = raw.size();
  std::vector<Staged> staged(raw.size());

  const auto n = static_cast<std::int64_t>(raw.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& s = staged[i];
    const auto& p = raw[i];
    if (malformed[i]) {
      s.stage = Stage::Malformed;
      continue;
    }
    s.text = text::normalize_text(p.text);
    if (!is_english(s.text, detectors)) {
      s.stage = Stage::Language;
      continue;
    }
    s.label = map_tag(p.tag, mapping);
    if (!s.label) {
      s.stage = Stage::Tag;
      continue;
    }
    if (!passes_length_filter(s.text, config.placeholders)) s.stage = Stage::Length;
  }

  std::vector<RawPost> survivors;
  std::vector<EmotionLabel> labels;
  auto& st = result.stats;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    switch (staged[i].stage) {
      case Stage::Malformed: ++st.malformed; break;
      case Stage::Language: ++st.language_dropped; break;
      case Stage::Tag: ++st.tag_dropped; break;
      case Stage::Length: ++st.length_dropped; break;
      case Stage::Pass: {
        RawPost p = raw[i];
        p.text = std::move(staged[i].text);
        survivors.push_back(std::move(p));
        labels.push_back(*staged[i].label);
        break;
      }
    }
  }

  auto flagged = flag_duplicates_and_memes(std::move(survivors), config.meme_k);
  for (std::size_t i = 0; i < flagged.size(); ++i) {
    auto& f = flagged[i];
    if (f.reason == DropReason::Duplicate) ++st.duplicate_dropped;
    if (f.reason == DropReason::Meme) ++st.meme_dropped;
    if (!f.keep) continue;
    result.posts.push_back({std::move(f.post.id), std::move(f.post.user_id), f.post.timestamp, labels[i],
                            std::move(f.post.text)});
  }
  st.kept = result.posts.size();
  return result;
}

std::optional<RawPost> parse_raw(const Json& j) {
  if (!j.is_object()) return std::nullopt;
  for (auto key : {"id", "user_id", "tag", "text"}) {
    if (!j.contains(key) || !j[key].is_string()) return std::nullopt;
  }
  if (!j.contains("timestamp") || !j["timestamp"].is_number_integer()) return std::nullopt;
  RawPost p{j["id"].get<std::string>(), j["user_id"].get<std::string>(),
            j["timestamp"].get<std::int64_t>(), j["tag"].get<std::string>(),
            j["text"].get<std::string>()};
  if (p.id.empty() || p.timestamp < 0) return std::nullopt;
  return p;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<RawPost>& raw, const TagMapping& mapping,
                            const LanguageDetectorSet& detectors, const PipelineConfig& config) {
  std::vector<bool> malformed(raw.size(), false);
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& p = raw[i];
    if (p.id.empty() || p.timestamp < 0 || !seen.insert(p.id).second) malformed[i] = true;
  }
  return finish(raw, std::move(malformed), mapping, detectors, config);
}

PipelineResult run_pipeline_file(const std::string& in_path, const TagMapping& mapping,
                                 const LanguageDetectorSet& detectors, const PipelineConfig& config) {
  std::vector<RawPost> raw;
  std::vector<bool> malformed;
  std::unordered_set<std::string> seen;
  jsonl::for_each_line(in_path, [&](std::size_t line_no, std::string_view line) {
    std::optional<RawPost> p;
    try {
      p = parse_raw(Json::parse(line));
    } catch (const Json::parse_error&) {
    }
    if (!p || !seen.insert(p->id).second) {
      spdlog::debug("{}:{}: malformed record skipped", in_path, line_no);
      raw.emplace_back();
      malformed.push_back(true);
      return;
    }
    raw.push_back(std::move(*p));
    malformed.push_back(false);
  });
  return finish(raw, std::move(malformed), mapping, detectors, config);
}

std::string validate(const CleanPost& post, const PlaceholderPatterns& patterns) {
  if (post.text.find_first_of("\t\n\r") != std::string::npos) return "text contains tab/newline/CR";
  if (post.text.find("  ") != std::string::npos) return "text contains a run of spaces";
  if (!post.text.empty() && (post.text.front() == ' ' || post.text.back() == ' '))
    return "text has leading or trailing space";
  if (content_word_count(post.text, patterns) < 3) return "fewer than three content words";
  if (post.timestamp < 0) return "negative timestamp";
  return {};
}

std::vector<CleanPost> read_clean_jsonl(const std::string& path) {
  std::vector<CleanPost> out;
  jsonl::for_each_line(path, [&](std::size_t n, std::string_view line) {
    try {
      const Json j = Json::parse(line);
      const auto label = parse_label(j.at("label").get<std::string>());
      if (!label) throw Error("unknown label");
      out.push_back({j.at("id").get<std::string>(), j.at("user_id").get<std::string>(),
                     j.at("timestamp").get<std::int64_t>(), *label, j.at("text").get<std::string>()});
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(n) + ": bad clean post: " + e.what());
    }
  });
  return out;
}

void write_clean_jsonl(const std::string& path, const std::vector<CleanPost>& posts) {
  std::vector<Json> rows;
  rows.reserve(posts.size());
  for (const auto& p : posts) {
    Json j;
    j["id"] = p.id;
    j["user_id"] = p.user_id;
    j["timestamp"] = p.timestamp;
    j["label"] = std::string(label_name(p.label));
    j["text"] = p.text;
    rows.push_back(std::move(j));
  }
  jsonl::write_all(path, rows);
}

std::string stats_json(const PipelineStats& s) {
  Json j;
  j["input"] = s.input;
  j["malformed"] = s.malformed;
  j["language_dropped"] = s.language_dropped;
  j["tag_dropped"] = s.tag_dropped;
  j["length_dropped"] = s.length_dropped;
  j["duplicate_dropped"] = s.duplicate_dropped;
  j["meme_dropped"] = s.meme_dropped;
  j["kept"] = s.kept;
  return j.dump(2) + "\n";
}

}  // namespace emoid::corpus
