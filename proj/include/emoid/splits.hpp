#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "emoid/corpus.hpp"

namespace emoid::splits {

struct SplitSpec {
  double random_test_frac = 0.10;
  double user_test_frac = 0.10;  // fraction of users
  double temporal_test_frac = 0.10;
  double dev_frac = 0.10;        // fraction of what remains after the tests
  std::uint64_t seed = 42;

  void validate() const;
  static SplitSpec from_json_file(const std::string& path);
};

enum class Split : std::uint8_t { Train = 0, Dev, UserTest, TemporalTest, RandomTest };
inline constexpr std::array<Split, 5> kAllSplits{Split::Train, Split::Dev, Split::UserTest,
                                                 Split::TemporalTest, Split::RandomTest};
std::string_view split_name(Split s);

struct SplitManifest {
  std::array<std::size_t, 5> sizes{};
  std::array<std::array<std::size_t, kNumLabels>, 5> label_counts{};
  std::size_t users_total = 0;
  std::size_t users_sampled = 0;
  double user_test_post_fraction = 0.0;
  // Posts that tie the first temporal-test timestamp but fell before the
  // cut; they are kept out of train so the temporal ordering stays strict.
  std::size_t boundary_excluded = 0;
};

struct SplitResult {
  std::array<std::vector<std::string>, 5> ids;  // indexed by Split, chronological (ties by id)
  SplitManifest manifest;

  const std::vector<std::string>& operator[](Split s) const { return ids[static_cast<std::size_t>(s)]; }
  bool operator==(const SplitResult& o) const { return ids == o.ids; }
};

/// Extraction order: temporal tail, then sampled users, then a random test
/// sample, then dev from the remainder; train is what is left.
SplitResult build_splits(const std::vector<corpus::CleanPost>& posts, const SplitSpec& spec);

/// One JSONL per split plus `manifest.json`.
void write_splits(const std::string& out_dir, const std::vector<corpus::CleanPost>& posts,
                  const SplitResult& result);

std::string manifest_json(const SplitManifest& m);

}  // namespace emoid::splits
