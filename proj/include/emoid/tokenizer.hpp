#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace emoid {

using TokenId = std::int32_t;

struct Piece {
  TokenId id = 0;
  std::size_t begin = 0;  // byte span in the source text
  std::size_t end = 0;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  /// Content pieces only, without sequence delimiters.
  virtual std::vector<Piece> tokenize(std::string_view text) const = 0;
};

namespace special {
inline constexpr TokenId kMask = 0;
inline constexpr TokenId kPad = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr TokenId kBos = 3;  // <s>, also the pooled classification position
inline constexpr TokenId kEos = 4;  // </s>
inline constexpr TokenId kCount = 5;
}  // namespace special

// Positions holding these ids are never chosen for MLM prediction.
inline bool is_special(TokenId id) {
  return id == special::kMask || id == special::kPad || id == special::kBos || id == special::kEos;
}

/// Corpus-fitted word-level vocabulary. Text is lowercased and split on
/// whitespace, then into runs of word characters and single punctuation
/// marks. `<mask>`, `[link]` and `[user]` stay whole.
class WordTokenizer final : public Tokenizer {
 public:
  WordTokenizer();

  /// Keeps the `vocab_size - 5` most frequent words (ties lexicographic).
  static WordTokenizer fit(std::span<const std::string> texts, std::size_t vocab_size);
  static WordTokenizer load(const std::string& path);
  void save(const std::string& path) const;

  std::vector<Piece> tokenize(std::string_view text) const override;

  /// `<s>` + pieces + `</s>`, truncated to `max_len` ids in total.
  std::vector<TokenId> encode(std::string_view text, std::size_t max_len) const;

  std::size_t size() const { return vocab_.size(); }
  const std::string& token(TokenId id) const { return vocab_.at(static_cast<std::size_t>(id)); }
  TokenId id_of(std::string_view word) const;

  bool operator==(const WordTokenizer& o) const { return vocab_ == o.vocab_; }

 private:
  void add(std::string word);

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Raw split used by the tokenizer, without vocabulary lookup.
struct RawPiece {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<RawPiece> split_pieces(std::string_view text);

}  // namespace emoid
