#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emoid/common.hpp"

namespace emoid::attribution {

using Probs = std::array<double, kNumLabels>;

/// Scores a batch of texts. A nullopt entry marks a failed perturbation.
using BatchScorer = std::function<std::vector<std::optional<Probs>>(std::span<const std::string>)>;

/// Wraps a per-text scorer; exceptions become failed samples.
BatchScorer per_text(std::function<Probs(std::string_view)> fn);

struct ExplainConfig {
  std::size_t n_samples = 1000;
  std::optional<double> kernel_width;  // default 0.75 * sqrt(d)
  double ridge_alpha = 1.0;
  std::size_t batch = 256;
  std::uint64_t seed = 0;
};

struct Explanation {
  EmotionLabel target = EmotionLabel::Sadness;
  std::vector<std::string> tokens;
  std::vector<double> weights;  // one per token
  double intercept = 0.0;
  Probs confidences{};          // model output on the unperturbed text
  std::size_t n_samples = 0;    // samples used in the fit
  std::size_t n_dropped = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  bool operator==(const Explanation&) const = default;
};

/// Word-deletion perturbations scored by `scorer`, weighted by an
/// exponential kernel on cosine distance to the full text, fitted with a
/// weighted ridge regression on token-presence features.
Explanation explain(const BatchScorer& scorer, std::string_view text, EmotionLabel target,
                    const ExplainConfig& cfg = {});

}  // namespace emoid::attribution
