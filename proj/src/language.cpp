// Heuristic English detectors. Each looks at a different signal so that the
// 2-of-3 vote is not three copies of the same judgment.

#include <array>
#include <string_view>
#include <unordered_set>

#include "emoid/corpus.hpp"
#include "emoid/text.hpp"

namespace emoid::corpus {
namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words{
      "a", "about", "after", "all", "am", "an", "and", "any", "are", "as", "at", "be",
      "because", "been", "but", "by", "can", "could", "did", "do", "don't", "for", "from",
      "get", "got", "had", "has", "have", "he", "her", "him", "his", "how", "i", "i'm",
      "if", "in", "is", "it", "it's", "just", "know", "like", "me", "my", "no", "not", "now",
      "of", "on", "one", "or", "our", "out", "really", "so", "some", "that", "the", "their",
      "them", "then", "there", "they", "this", "to", "today", "too", "up", "want", "was",
      "we", "were", "what", "when", "who", "why", "will", "with", "would", "you", "your"};
  return words;
}

bool stopword_detector(std::string_view s) {
  const auto words = text::lexical_words(s);
  if (words.empty()) return false;
  std::size_t hits = 0;
  for (const auto& w : words) hits += stopwords().count(w.word);
  return hits * 10 >= words.size();  // at least 10% function words
}

bool ascii_letter_detector(std::string_view s) {
  std::size_t letters = 0, ascii_letters = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c >= 0x80) {
      // Count each multibyte code point once, at its lead byte.
      if ((c & 0xC0) == 0xC0) ++letters;
      continue;
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      ++letters;
      ++ascii_letters;
    }
  }
  return letters > 0 && ascii_letters * 10 >= letters * 9;
}

// Function words of other Latin-script languages. Their letter bigrams look
// English enough to fool the profile below on their own.
const std::unordered_set<std::string>& foreign_function_words() {
  static const std::unordered_set<std::string> words{
      "de", "la", "el", "los", "las", "que", "por", "una", "con", "para", "del", "est", "les",
      "le", "je", "ne", "pas", "et", "une", "des", "du", "der", "die", "das", "und", "ist",
      "nicht", "ein", "eine", "sehr", "il", "di", "che", "non", "sono", "och", "het", "een",
      "van", "muy", "mais", "nous", "vous", "ich", "mit", "o", "da", "em", "os"};
  return words;
}

bool foreign_marked(std::string_view s) {
  const auto words = text::lexical_words(s);
  std::size_t hits = 0;
  for (const auto& w : words) hits += foreign_function_words().count(w.word);
  return hits >= 2 && hits * 100 >= words.size() * 15;
}

// Fraction of letter bigrams that are among the most common English bigrams,
// vetoed by a cluster of foreign function words.
bool bigram_detector(std::string_view s) {
  if (foreign_marked(s)) return false;
  static constexpr std::array<std::string_view, 40> common{
      "th", "he", "in", "er", "an", "re", "on", "at", "en", "nd", "ti", "es", "or", "te",
      "of", "ed", "is", "it", "al", "ar", "st", "to", "nt", "ng", "se", "ha", "as", "ou",
      "io", "le", "ve", "co", "me", "de", "hi", "ri", "ro", "ic", "ne", "ea"};
  std::size_t total = 0, hits = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const char a = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
    const char b = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i + 1])));
    if (a < 'a' || a > 'z' || b < 'a' || b > 'z') continue;
    ++total;
    const char pair[2] = {a, b};
    for (auto c : common) {
      if (c == std::string_view(pair, 2)) {
        ++hits;
        break;
      }
    }
  }
  return total > 0 && hits * 100 >= total * 20;
}

}  // namespace

LanguageDetectorSet builtin_detectors() {
  return {{LanguageDetector{"stopwords", stopword_detector},
           LanguageDetector{"ascii-letters", ascii_letter_detector},
           LanguageDetector{"letter-bigrams", bigram_detector}}};
}

}  // namespace emoid::corpus
