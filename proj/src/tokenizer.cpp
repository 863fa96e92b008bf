#include "emoid/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "emoid/common.hpp"
#include "emoid/jsonl.hpp"

namespace emoid {
namespace {

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '\'';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

std::vector<RawPiece> split_pieces(std::string_view text) {
  std::vector<RawPiece> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t b = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i == b) break;
    const std::string lower = to_lower(text.substr(b, i - b));
    if (lower == "<mask>" || lower == "[link]" || lower == "[user]") {
      out.push_back({lower, b, i});
      continue;
    }
    for (std::size_t j = b; j < i;) {
      std::size_t k = j + 1;
      if (is_word_byte(text[j])) {
        while (k < i && is_word_byte(text[k])) ++k;
      }
      out.push_back({lower.substr(j - b, k - j), j, k});
      j = k;
    }
  }
  return out;
}

WordTokenizer::WordTokenizer() {
  for (auto s : {"<mask>", "<pad>", "<unk>", "<s>", "</s>"}) add(s);
}

void WordTokenizer::add(std::string word) {
  const auto id = static_cast<TokenId>(vocab_.size());
  if (!index_.emplace(word, id).second) throw Error("duplicate vocabulary entry '" + word + "'");
  vocab_.push_back(std::move(word));
}

WordTokenizer WordTokenizer::fit(std::span<const std::string> texts, std::size_t vocab_size) {
  if (vocab_size < static_cast<std::size_t>(special::kCount)) throw Error("vocab size below special-token count");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& p : split_pieces(t)) {
      if (p.text != "<mask>") ++counts[std::move(p.text)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  WordTokenizer tok;
  for (auto& [w, c] : ranked) {
    if (tok.size() >= vocab_size) break;
    tok.add(w);
  }
  return tok;
}

WordTokenizer WordTokenizer::load(const std::string& path) {
  WordTokenizer tok;
  std::istringstream in(jsonl::read_text(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n++ < static_cast<std::size_t>(special::kCount)) {
      if (line != tok.vocab_[n - 1]) throw Error(path + ": unexpected special token order");
      continue;
    }
    tok.add(line);
  }
  return tok;
}

void WordTokenizer::save(const std::string& path) const {
  std::string out;
  for (const auto& w : vocab_) out += w + "\n";
  jsonl::write_text(path, out);
}

TokenId WordTokenizer::id_of(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? special::kUnk : it->second;
}

std::vector<Piece> WordTokenizer::tokenize(std::string_view text) const {
  std::vector<Piece> out;
  for (const auto& p : split_pieces(text)) out.push_back({id_of(p.text), p.begin, p.end});
  return out;
}

std::vector<TokenId> WordTokenizer::encode(std::string_view text, std::size_t max_len) const {
  if (max_len < 2) throw Error("max_len must leave room for <s> and </s>");
  std::vector<TokenId> ids{special::kBos};
  for (const auto& p : tokenize(text)) {
    if (ids.size() + 1 >= max_len) break;
    ids.push_back(p.id);
  }
  ids.push_back(special::kEos);
  return ids;
}

}  // namespace emoid
