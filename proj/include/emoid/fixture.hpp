#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emoid/common.hpp"
#include "emoid/corpus.hpp"
#include "emoid/lexicon.hpp"

// Synthetic stand-ins for the real corpora: templated posts whose label is
// carried by class marker words, with the usual dirt (markup, links,
// duplicates, memes, foreign-language and unmapped-tag posts) mixed in.
namespace emoid::fixture {

struct FixtureConfig {
  std::size_t posts = 5000;
  std::size_t users = 400;
  double label_noise = 0.1;  // share of posts whose markers come from another class
  double dirt = 0.04;        // share of posts that the cleaning pipeline should drop
  std::int64_t start_ts = 1'500'000'000;
  std::int64_t span_s = 3 * 365 * 24 * 3600;
  std::uint64_t seed = 2024;
};

/// Marker words per label, in label order.
const std::vector<std::vector<std::string>>& marker_words();

std::vector<corpus::RawPost> synth_raw_posts(const FixtureConfig& cfg);

/// Already-clean labeled posts (no dirt), for tests that skip the pipeline.
std::vector<corpus::CleanPost> synth_clean_posts(const FixtureConfig& cfg);

lexicon::EmotionLexicon synth_lexicon();

struct OodItem {
  std::string text;
  std::string label;  // dataset-native label string
};

/// Short reader-labeled style texts with labels outside the five-label
/// scheme mixed in (joy, surprise, ...).
std::vector<OodItem> synth_ood(std::size_t n, std::uint64_t seed);

/// "I felt <emotion> when/because <situation>" sentences, unmasked.
std::vector<OodItem> synth_enisear(std::size_t n, std::uint64_t seed);

/// raw.jsonl, lexicon.tsv, cmap.json, ood.jsonl, enisear.jsonl under `dir`.
void write_fixture(const std::string& dir, const FixtureConfig& cfg);

}  // namespace emoid::fixture
