#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "emoid/common.hpp"

namespace emoid::corpus {

struct RawPost {
  std::string id;
  std::string user_id;
  std::int64_t timestamp = 0;
  std::string tag;
  std::string text;
};

struct CleanPost {
  std::string id;
  std::string user_id;
  std::int64_t timestamp = 0;
  EmotionLabel label = EmotionLabel::Sadness;
  std::string text;

  bool operator==(const CleanPost&) const = default;
};

/// Lowercased tag -> label. Default-constructed mapping holds the 22 tags of
/// the five-label scheme.
class TagMapping {
 public:
  TagMapping();
  static TagMapping empty();
  /// JSON object {"tag": "Label", ...}; throws on unknown labels.
  static TagMapping from_json_file(const std::string& path);

  /// Throws if `tag` is already mapped to a different label.
  void add(std::string_view tag, EmotionLabel label);
  std::optional<EmotionLabel> lookup(std::string_view tag) const;
  const std::map<std::string, EmotionLabel>& entries() const { return map_; }

 private:
  struct NoDefaults {};
  explicit TagMapping(NoDefaults) {}
  std::map<std::string, EmotionLabel> map_;
};

std::optional<EmotionLabel> map_tag(std::string_view tag, const TagMapping& mapping);

struct LanguageDetector {
  std::string name;
  std::function<bool(std::string_view)> is_english;
};

struct LanguageDetectorSet {
  std::array<LanguageDetector, 3> detectors;
};

/// 2-of-3 vote. A detector that throws is counted as a "no" vote.
bool is_english(std::string_view text, const LanguageDetectorSet& detectors);

/// Three heuristic detectors (stopword ratio, ASCII-letter ratio, English
/// letter-bigram profile) used when no external detectors are wired in.
LanguageDetectorSet builtin_detectors();

struct PlaceholderPatterns {
  std::vector<std::regex> patterns;
  /// `[LINK]`, `[USER]`, raw http(s) URLs and `@mentions`.
  static PlaceholderPatterns defaults();
  bool matches(std::string_view token) const;
};

/// Counts whitespace tokens that are not link/mention placeholders.
std::size_t content_word_count(std::string_view text, const PlaceholderPatterns& patterns);

bool passes_length_filter(std::string_view text,
                          const PlaceholderPatterns& patterns = PlaceholderPatterns::defaults());

enum class DropReason : std::uint8_t { Kept, Duplicate, Meme };

struct FlaggedPost {
  RawPost post;
  bool keep = true;
  DropReason reason = DropReason::Kept;
};

/// Exact-text dedup (earliest timestamp wins, ties by id) and meme removal
/// (a text posted by >= meme_k distinct users is dropped everywhere).
/// Output preserves input order.
std::vector<FlaggedPost> flag_duplicates_and_memes(std::vector<RawPost> posts,
                                                   std::size_t meme_k = 10);

struct PipelineConfig {
  std::size_t meme_k = 10;
  PlaceholderPatterns placeholders = PlaceholderPatterns::defaults();
};

struct PipelineStats {
  std::size_t input = 0;
  std::size_t malformed = 0;
  std::size_t language_dropped = 0;
  std::size_t tag_dropped = 0;
  std::size_t length_dropped = 0;
  std::size_t duplicate_dropped = 0;
  std::size_t meme_dropped = 0;
  std::size_t kept = 0;

  bool operator==(const PipelineStats&) const = default;
};

struct PipelineResult {
  std::vector<CleanPost> posts;
  PipelineStats stats;
};

PipelineResult run_pipeline(const std::vector<RawPost>& raw, const TagMapping& mapping,
                            const LanguageDetectorSet& detectors, const PipelineConfig& config);

/// Streams a JSON Lines file through the pipeline. Lines that are not valid
/// JSON objects with the five post fields are counted as malformed.
PipelineResult run_pipeline_file(const std::string& in_path, const TagMapping& mapping,
                                 const LanguageDetectorSet& detectors, const PipelineConfig& config);

/// Empty string if the post satisfies every clean-post invariant, otherwise
/// a description of the first violation.
std::string validate(const CleanPost& post,
                     const PlaceholderPatterns& patterns = PlaceholderPatterns::defaults());

std::vector<CleanPost> read_clean_jsonl(const std::string& path);
void write_clean_jsonl(const std::string& path, const std::vector<CleanPost>& posts);
std::string stats_json(const PipelineStats& stats);

}  // namespace emoid::corpus
