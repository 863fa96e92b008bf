#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emoid/rng.hpp"
#include "emoid/tokenizer.hpp"

namespace emoid::emlm {

struct MaskingConfig {
  double p_emotion = 0.5;
  double p_other = 0.15;
  // What a selected position becomes: mask token / random token / unchanged.
  double replace_mask = 0.8;
  double replace_random = 0.1;
  double replace_keep = 0.1;
  TokenId ignore_index = -100;
  std::uint64_t seed = 0;

  void validate() const;
  /// Plain MLM: emotion words get no preference.
  static MaskingConfig uniform(double p = 0.15);
};

struct MaskedExample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> labels;
  std::vector<bool> emotion_mask;

  bool operator==(const MaskedExample&) const = default;
};

/// One flag per piece of `tokenizer.tokenize(text)`: set iff the piece lies
/// inside a whole word (punctuation-stripped, lowercased) from `emotion_words`.
std::vector<bool> mark_emotion_tokens(std::string_view text, const Tokenizer& tokenizer,
                                      const std::set<std::string>& emotion_words);

struct EncodedText {
  std::vector<TokenId> ids;
  std::vector<bool> emotion_mask;  // aligned with ids; false on <s> and </s>
};

EncodedText encode_with_emotion_mask(std::string_view text, const WordTokenizer& tokenizer,
                                     const std::set<std::string>& emotion_words, std::size_t max_len);

/// Selects positions (emotion positions with p_emotion, others with p_other;
/// special ids never) and applies the mask/random/keep replacement.
/// `vocab_size` bounds random replacements, which never draw special ids.
MaskedExample make_mlm_example(std::span<const TokenId> token_ids, const std::vector<bool>& emotion_mask,
                               const MaskingConfig& cfg, Rng& rng, std::size_t vocab_size);

}  // namespace emoid::emlm
