#pragma once

// Shared helpers for the test binaries: scratch directories and small
// hand-rolled generators.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "emoid/common.hpp"
#include "emoid/rng.hpp"

namespace emoid::testing {

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() / ("emoid_" + tag + "_" + std::to_string(rng.next() % 1000000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

inline std::vector<EmotionLabel> random_labels(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<EmotionLabel> out(n);
  for (auto& l : out) l = kAllLabels[rng.below(k)];
  return out;
}

inline std::string random_word(Rng& rng, std::size_t min_len = 1, std::size_t max_len = 8) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(26));
  return w;
}

// Arbitrary bytes biased toward the characters the normalizer cares about.
inline std::string messy_text(Rng& rng, std::size_t max_len = 60) {
  static const std::vector<std::string> atoms{
      " ",   "  ",  "\t", "\n",     "\r",      "<b>",   "</b>",  "<br/>", "&amp;", "&lt;", "&gt;",
      "&#38;", "&#x26;", "&amp;amp;", "&lt;b&gt;", "<mask>", "&bogus;", "<",     ">",     "&",    "x",
      "word", "hello", "[LINK]", "@user", "\xc3\xa9"};
  std::string s;
  const std::size_t parts = rng.below(max_len / 3 + 1);
  for (std::size_t i = 0; i < parts; ++i) {
    if (rng.bernoulli(0.3)) {
      s += random_word(rng);
    } else {
      s += atoms[rng.below(atoms.size())];
    }
  }
  return s;
}

}  // namespace emoid::testing
