#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace emoid::text {

/// Decodes named (`&amp;`), decimal (`&#38;`) and hex (`&#x26;`) character
/// references. Unknown or malformed references are left as written.
std::string decode_html_entities(std::string_view s);

/// Removes markup tags such as `<b>`, `</a>` or `<br/>`. The model's own
/// `<mask>` token is not markup and survives.
std::string strip_html_tags(std::string_view s);

/// Strips tags and decodes entities until stable, maps tab/LF/CR to spaces,
/// collapses space runs and trims. Idempotent.
std::string normalize_text(std::string_view s);

std::vector<std::string_view> split_whitespace(std::string_view s);

struct WordSpan {
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
  std::string word;       // lowercased, punctuation stripped
};

/// Whitespace-delimited words with leading/trailing ASCII punctuation removed
/// and lowercased. Tokens that are punctuation only are dropped. This is the
/// word rule shared by lexicon scoring and emotion-word marking.
std::vector<WordSpan> lexical_words(std::string_view s);

}  // namespace emoid::text
