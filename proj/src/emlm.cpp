#include "emoid/emlm.hpp"

#include <cmath>

#include "emoid/common.hpp"
#include "emoid/text.hpp"

namespace emoid::emlm {

void MaskingConfig::validate() const {
  for (double p : {p_emotion, p_other, replace_mask, replace_random, replace_keep}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("masking probabilities must lie in [0,1]");
  }
  if (std::abs(replace_mask + replace_random + replace_keep - 1.0) > 1e-9)
    throw Error("mask/random/keep split must sum to 1");
}

MaskingConfig MaskingConfig::uniform(double p) {
  MaskingConfig c;
  c.p_emotion = p;
  c.p_other = p;
  return c;
}

std::vector<bool> mark_emotion_tokens(std::string_view text, const Tokenizer& tokenizer,
                                      const std::set<std::string>& emotion_words) {
  const auto pieces = tokenizer.tokenize(text);
  std::vector<bool> marked(pieces.size(), false);
  if (emotion_words.empty()) return marked;
  for (const auto& w : text::lexical_words(text)) {
    if (!emotion_words.count(w.word)) continue;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].begin < w.end && pieces[i].end > w.begin) marked[i] = true;
    }
  }
  return marked;
}

EncodedText encode_with_emotion_mask(std::string_view text, const WordTokenizer& tokenizer,
                                     const std::set<std::string>& emotion_words, std::size_t max_len) {
  EncodedText out;
  out.ids = tokenizer.encode(text, max_len);
  const auto marks = mark_emotion_tokens(text, tokenizer, emotion_words);
  out.emotion_mask.assign(out.ids.size(), false);
  // encode() keeps a prefix of the pieces between <s> and </s>.
  for (std::size_t i = 1; i + 1 < out.ids.size(); ++i) out.emotion_mask[i] = marks[i - 1];
  return out;
}

MaskedExample make_mlm_example(std::span<const TokenId> token_ids, const std::vector<bool>& emotion_mask,
                               const MaskingConfig& cfg, Rng& rng, std::size_t vocab_size) {
  if (token_ids.size() != emotion_mask.size()) throw Error("token ids and emotion mask differ in length");
  MaskedExample ex;
  ex.input_ids.assign(token_ids.begin(), token_ids.end());
  ex.labels.assign(token_ids.size(), cfg.ignore_index);
  ex.emotion_mask.assign(emotion_mask.begin(), emotion_mask.end());

  const auto n_random = vocab_size > static_cast<std::size_t>(special::kCount)
                            ? vocab_size - static_cast<std::size_t>(special::kCount)
                            : 0;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (is_special(token_ids[i])) continue;
    const double p = emotion_mask[i] ? cfg.p_emotion : cfg.p_other;
    if (!rng.bernoulli(p)) continue;
    ex.labels[i] = token_ids[i];
    const double u = rng.uniform();
    if (u < cfg.replace_mask) {
      ex.input_ids[i] = special::kMask;
    } else if (u < cfg.replace_mask + cfg.replace_random && n_random > 0) {
      ex.input_ids[i] = static_cast<TokenId>(special::kCount + static_cast<TokenId>(rng.below(n_random)));
    }
  }
  return ex;
}

}  // namespace emoid::emlm
