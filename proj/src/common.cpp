#include "emoid/common.hpp"

#include <algorithm>

namespace emoid {

std::string_view label_name(EmotionLabel l) {
  switch (l) {
    case EmotionLabel::Sadness: return "Sadness";
    case EmotionLabel::Anger: return "Anger";
    case EmotionLabel::Fear: return "Fear";
    case EmotionLabel::Affection: return "Affection";
    case EmotionLabel::Happiness: return "Happiness";
  }
  return "?";
}

std::optional<EmotionLabel> parse_label(std::string_view s) {
  const std::string lower = to_lower(s);
  for (EmotionLabel l : kAllLabels) {
    if (to_lower(label_name(l)) == lower) return l;
  }
  return std::nullopt;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
  });
  return out;
}

std::string_view code_version() {
#ifdef EMOID_VERSION
  return EMOID_VERSION;
#else
  return "unknown";
#endif
}

}  // namespace emoid
