#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emoid {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed order; reports, tie-breaks and head outputs all follow it.
enum class EmotionLabel : std::uint8_t { Sadness = 0, Anger, Fear, Affection, Happiness };

inline constexpr std::size_t kNumLabels = 5;
inline constexpr std::array<EmotionLabel, kNumLabels> kAllLabels{
    EmotionLabel::Sadness, EmotionLabel::Anger, EmotionLabel::Fear,
    EmotionLabel::Affection, EmotionLabel::Happiness};

// Out-of-domain label set: Affection is folded into Happiness.
inline constexpr std::array<EmotionLabel, 4> kOodLabels{
    EmotionLabel::Sadness, EmotionLabel::Anger, EmotionLabel::Fear,
    EmotionLabel::Happiness};

constexpr std::size_t index_of(EmotionLabel l) { return static_cast<std::size_t>(l); }

std::string_view label_name(EmotionLabel l);

/// Case-insensitive parse of a label name ("sadness", "Anger", ...).
std::optional<EmotionLabel> parse_label(std::string_view s);

std::string to_lower(std::string_view s);

/// Version string baked in at configure time (`git describe`).
std::string_view code_version();

}  // namespace emoid
