#include "emoid/lexicon.hpp"

#include <sstream>

#include "emoid/jsonl.hpp"
#include "emoid/text.hpp"

namespace emoid::lexicon {

void EmotionLexicon::add(std::string_view word, std::string_view category) {
  if (word.empty()) throw Error("lexicon word must be non-empty");
  if (category.empty()) throw Error("lexicon category must be non-empty");
  words_[to_lower(word)].insert(std::string(category));
  inventory_.insert(std::string(category));
}

const std::set<std::string>* EmotionLexicon::categories_of(std::string_view word) const {
  const auto it = words_.find(to_lower(word));
  return it == words_.end() ? nullptr : &it->second;
}

bool EmotionLexicon::contains(std::string_view word, std::string_view category) const {
  const auto* cats = categories_of(word);
  return cats != nullptr && cats->count(std::string(category)) != 0;
}

EmotionLexicon parse_lexicon(std::string_view content) {
  EmotionLexicon lex;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    for (std::size_t b = 0;;) {
      const auto tab = line.find('\t', b);
      fields.push_back(line.substr(b, tab == std::string_view::npos ? std::string_view::npos : tab - b));
      if (tab == std::string_view::npos) break;
      b = tab + 1;
    }
    const auto fail = [&](const std::string& why) {
      throw Error("lexicon line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 3) fail("expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) fail("empty word or category");
    if (fields[2] == "1") {
      lex.add(fields[0], fields[1]);
    } else if (fields[2] != "0") {
      fail("flag must be 0 or 1");
    }
  }
  return lex;
}

EmotionLexicon load_lexicon(const std::string& path) { return parse_lexicon(jsonl::read_text(path)); }

void save_lexicon(const std::string& path, const EmotionLexicon& lex) {
  std::ostringstream out;
  for (const auto& [word, cats] : lex.entries()) {
    for (const auto& c : cats) out << word << '\t' << c << "\t1\n";
  }
  jsonl::write_text(path, out.str());
}

std::set<std::string> emotion_word_set(const EmotionLexicon& lex) {
  std::set<std::string> out;
  for (const auto& [word, cats] : lex.entries()) {
    if (!cats.empty()) out.insert(word);
  }
  return out;
}

double category_score(std::string_view text, std::string_view category, const EmotionLexicon& lex) {
  if (!lex.has_category(category)) throw Error("unknown lexicon category '" + std::string(category) + "'");
  const auto words = text::lexical_words(text);
  if (words.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& w : words) hits += lex.contains(w.word, category) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(words.size());
}

CategoryMap CategoryMap::defaults() {
  CategoryMap m;
  m.add("anger", EmotionLabel::Anger);
  m.add("fear", EmotionLabel::Fear);
  m.add("sadness", EmotionLabel::Sadness);
  m.add("positive", EmotionLabel::Happiness);
  return m;
}

CategoryMap CategoryMap::from_json_file(const std::string& path) {
  const auto j = jsonl::read_json(path);
  if (!j.is_object()) throw Error(path + ": category map must be a JSON object");
  CategoryMap m;
  for (const auto& [cat, value] : j.items()) {
    const auto label = value.is_string() ? parse_label(value.get<std::string>()) : std::nullopt;
    if (!label) throw Error(path + ": category '" + cat + "' maps to an unknown label");
    m.add(cat, *label);
  }
  return m;
}

void CategoryMap::add(std::string_view category, EmotionLabel label) {
  const auto [it, inserted] = map_.emplace(std::string(category), label);
  if (!inserted && it->second != label) throw Error("category '" + std::string(category) + "' mapped twice");
}

std::vector<std::string> CategoryMap::categories_for(EmotionLabel label) const {
  std::vector<std::string> out;
  for (const auto& [c, l] : map_) {
    if (l == label) out.push_back(c);
  }
  return out;
}

}  // namespace emoid::lexicon
