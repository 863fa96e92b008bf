#include "emoid/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <utility>

#include "emoid/common.hpp"

namespace emoid::text {
namespace {

struct NamedEntity {
  std::string_view name;
  char32_t code;
};

// Sorted by name for binary search.
constexpr std::array<NamedEntity, 44> kEntities{{
    {"amp", U'&'},     {"apos", U'\''},   {"bull", 0x2022},  {"cent", 0x00A2},
    {"copy", 0x00A9},  {"deg", 0x00B0},   {"divide", 0x00F7}, {"eacute", 0x00E9},
    {"euro", 0x20AC},  {"frac12", 0x00BD}, {"gt", U'>'},      {"hearts", 0x2665},
    {"hellip", 0x2026}, {"iexcl", 0x00A1}, {"iquest", 0x00BF}, {"laquo", 0x00AB},
    {"larr", 0x2190},  {"ldquo", 0x201C}, {"lsaquo", 0x2039}, {"lsquo", 0x2018},
    {"lt", U'<'},      {"mdash", 0x2014}, {"middot", 0x00B7}, {"nbsp", U' '},
    {"ndash", 0x2013}, {"para", 0x00B6},  {"plusmn", 0x00B1}, {"pound", 0x00A3},
    {"quot", U'"'},    {"raquo", 0x00BB}, {"rarr", 0x2192},  {"rdquo", 0x201D},
    {"reg", 0x00AE},   {"rsaquo", 0x203A}, {"rsquo", 0x2019}, {"sbquo", 0x201A},
    {"sect", 0x00A7},  {"shy", 0x00AD},   {"star", 0x2606},  {"times", 0x00D7},
    {"trade", 0x2122}, {"uarr", 0x2191},  {"uuml", 0x00FC},  {"yen", 0x00A5},
}};

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool valid_code_point(std::uint32_t cp) {
  return cp > 0 && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
}

// Parses the reference starting at s[0] == '&'. Returns the number of bytes
// consumed, or 0 if this is not a decodable reference.
std::size_t decode_one(std::string_view s, std::string& out) {
  const auto semi = s.find(';', 1);
  if (semi == std::string_view::npos || semi > 12) return 0;
  const std::string_view body = s.substr(1, semi - 1);
  if (body.empty()) return 0;

  if (body[0] == '#') {
    std::string_view digits = body.substr(1);
    int base = 10;
    if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
      base = 16;
      digits.remove_prefix(1);
    }
    if (digits.empty() || digits.size() > 7) return 0;
    std::uint32_t cp = 0;
    for (char c : digits) {
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (base == 16 && c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (base == 16 && c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else return 0;
      cp = cp * static_cast<std::uint32_t>(base) + static_cast<std::uint32_t>(v);
    }
    if (!valid_code_point(cp)) return 0;
    append_utf8(out, static_cast<char32_t>(cp));
    return semi + 1;
  }

  const auto it = std::lower_bound(kEntities.begin(), kEntities.end(), body,
                                   [](const NamedEntity& e, std::string_view key) { return e.name < key; });
  if (it == kEntities.end() || it->name != body) return 0;
  append_utf8(out, it->code);
  return semi + 1;
}

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || (c >= '0' && c <= '9'); }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string decode_html_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      if (const auto n = decode_one(s.substr(i), out); n > 0) {
        i += n;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string strip_html_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '<') {
      std::size_t j = i + 1;
      if (j < s.size() && s[j] == '/') ++j;
      if (j < s.size() && is_ascii_alpha(s[j])) {
        std::size_t k = j;
        while (k < s.size() && is_ascii_alnum(s[k])) ++k;
        const std::string_view name = s.substr(j, k - j);
        const auto close = s.find_first_of("<>", k);
        const bool well_formed = close != std::string_view::npos && s[close] == '>' &&
                                 (k == close || is_space(s[k]) || s[k] == '/');
        if (well_formed && !(name == "mask" && s[i + 1] != '/' && k == close)) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string normalize_text(std::string_view s) {
  std::string cur(s);
  // Each tag strip or entity decode strictly shortens the string, so this
  // terminates; iterating to a fixpoint is what makes the function idempotent.
  for (;;) {
    std::string next = decode_html_entities(strip_html_tags(cur));
    if (next == cur) break;
    cur = std::move(next);
  }

  std::string out;
  out.reserve(cur.size());
  bool pending_space = false;
  for (char c : cur) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::vector<WordSpan> lexical_words(std::string_view s) {
  std::vector<WordSpan> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    std::size_t e = i;
    while (b < e && is_ascii_punct(s[b])) ++b;
    while (e > b && is_ascii_punct(s[e - 1])) --e;
    if (e > b) out.push_back({b, e, to_lower(s.substr(b, e - b))});
  }
  return out;
}

}  // namespace emoid::text
