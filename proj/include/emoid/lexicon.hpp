#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emoid/common.hpp"

namespace emoid::lexicon {

/// Word -> emotion categories. Words are stored lowercased; lookups are
/// case-insensitive. Immutable once loaded.
class EmotionLexicon {
 public:
  void add(std::string_view word, std::string_view category);

  const std::set<std::string>* categories_of(std::string_view word) const;
  bool has_category(std::string_view category) const { return inventory_.count(std::string(category)) != 0; }
  bool contains(std::string_view word, std::string_view category) const;

  const std::map<std::string, std::set<std::string>>& entries() const { return words_; }
  const std::set<std::string>& inventory() const { return inventory_; }
  bool empty() const { return words_.empty(); }

  bool operator==(const EmotionLexicon&) const = default;

 private:
  std::map<std::string, std::set<std::string>> words_;
  std::set<std::string> inventory_;
};

/// One `word<TAB>category<TAB>flag` record per line; rows with flag 0 are
/// skipped. Throws with the line number on malformed input.
EmotionLexicon load_lexicon(const std::string& path);
EmotionLexicon parse_lexicon(std::string_view content);

/// Writes every (word, category) pair with flag 1, sorted.
void save_lexicon(const std::string& path, const EmotionLexicon& lex);

std::set<std::string> emotion_word_set(const EmotionLexicon& lex);

/// Share of the text's words that belong to `category`; 0 for empty text.
/// Throws if the category is not in the lexicon's inventory.
double category_score(std::string_view text, std::string_view category, const EmotionLexicon& lex);

/// Lexicon category -> label. Affection may stay unmapped.
class CategoryMap {
 public:
  /// anger->Anger, fear->Fear, sadness->Sadness, positive->Happiness.
  static CategoryMap defaults();
  /// JSON object {"category": "Label"}.
  static CategoryMap from_json_file(const std::string& path);

  void add(std::string_view category, EmotionLabel label);
  const std::map<std::string, EmotionLabel>& entries() const { return map_; }
  /// Categories mapped to `label`, empty if unmapped.
  std::vector<std::string> categories_for(EmotionLabel label) const;

 private:
  std::map<std::string, EmotionLabel> map_;
};

}  // namespace emoid::lexicon
