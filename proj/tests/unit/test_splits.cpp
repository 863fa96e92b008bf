#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "emoid/fixture.hpp"
#include "emoid/jsonl.hpp"
#include "emoid/splits.hpp"
#include "support.hpp"

using namespace emoid;
using namespace emoid::splits;

namespace {

std::map<std::string, const corpus::CleanPost*> by_id(const std::vector<corpus::CleanPost>& posts) {
  std::map<std::string, const corpus::CleanPost*> m;
  for (const auto& p : posts) m[p.id] = &p;
  return m;
}

// Checks every structural invariant; returns the union of all split ids.
std::set<std::string> check_invariants(const std::vector<corpus::CleanPost>& posts, const SplitResult& r) {
  const auto idx = by_id(posts);
  std::set<std::string> all;
  std::size_t total = 0;
  for (Split s : kAllSplits) {
    const auto& ids = r[s];
    REQUIRE_FALSE(ids.empty());
    total += ids.size();
    all.insert(ids.begin(), ids.end());
    CHECK(r.manifest.sizes[static_cast<std::size_t>(s)] == ids.size());
    std::size_t label_sum = 0;
    for (auto c : r.manifest.label_counts[static_cast<std::size_t>(s)]) label_sum += c;
    CHECK(label_sum == ids.size());
  }
  CHECK(all.size() == total);  // pairwise disjoint
  CHECK(total + r.manifest.boundary_excluded == posts.size());

  std::set<std::string> train_users, user_test_users;
  for (const auto& id : r[Split::Train]) train_users.insert(idx.at(id)->user_id);
  for (const auto& id : r[Split::UserTest]) user_test_users.insert(idx.at(id)->user_id);
  for (const auto& u : user_test_users) CHECK(train_users.count(u) == 0);

  std::int64_t max_train = std::numeric_limits<std::int64_t>::min();
  std::int64_t min_temporal = std::numeric_limits<std::int64_t>::max();
  for (const auto& id : r[Split::Train]) max_train = std::max(max_train, idx.at(id)->timestamp);
  for (const auto& id : r[Split::TemporalTest]) min_temporal = std::min(min_temporal, idx.at(id)->timestamp);
  CHECK(max_train < min_temporal);
  return all;
}

std::vector<corpus::CleanPost> grid_corpus(std::size_t users, std::size_t per_user) {
  std::vector<corpus::CleanPost> posts;
  for (std::size_t i = 0; i < users * per_user; ++i) {
    corpus::CleanPost p;
    p.id = "p" + std::to_string(1000 + i);
    p.user_id = "u" + std::to_string(i % users);
    p.timestamp = static_cast<std::int64_t>(i);
    p.label = kAllLabels[i % kNumLabels];
    p.text = "post number " + std::to_string(i);
    posts.push_back(p);
  }
  return posts;
}

}  // namespace

TEST_CASE("100 posts from 10 users") {
  const auto posts = grid_corpus(10, 10);
  SplitSpec spec;
  const auto r = build_splits(posts, spec);
  check_invariants(posts, r);
  CHECK(r[Split::RandomTest].size() == 10);
  CHECK(r[Split::TemporalTest].size() == 10);
  const auto idx = by_id(posts);
  // the ten latest posts
  for (const auto& id : r[Split::TemporalTest]) CHECK(idx.at(id)->timestamp >= 90);
  // one user; all of their pre-temporal posts
  std::set<std::string> users;
  for (const auto& id : r[Split::UserTest]) users.insert(idx.at(id)->user_id);
  REQUIRE(users.size() == 1);
  std::size_t owned = 0;
  for (const auto& p : posts) owned += (p.user_id == *users.begin() && p.timestamp < 90) ? 1 : 0;
  CHECK(r[Split::UserTest].size() == owned);
  // dev is 10% of what is left after the tests
  const std::size_t remainder = 100 - 10 - owned - 10;
  CHECK(r[Split::Dev].size() == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(remainder))));
}

TEST_CASE("a single user cannot be split") {
  auto posts = grid_corpus(1, 100);
  CHECK_THROWS_AS(build_splits(posts, SplitSpec{}), Error);
}

TEST_CASE("empty corpus and bad fractions are rejected") {
  CHECK_THROWS_AS(build_splits({}, SplitSpec{}), Error);
  SplitSpec bad;
  bad.dev_frac = 1.5;
  CHECK_THROWS_AS(build_splits(grid_corpus(10, 10), bad), Error);
}

TEST_CASE("timestamp ties at the temporal cut stay out of train") {
  auto posts = grid_corpus(10, 10);
  for (auto& p : posts) {
    if (p.timestamp >= 85 && p.timestamp <= 95) p.timestamp = 90;
  }
  const auto r = build_splits(posts, SplitSpec{});
  check_invariants(posts, r);
  CHECK(r.manifest.boundary_excluded > 0);
}

TEST_CASE("invariants hold across seeds and corpus shapes (property)") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    fixture::FixtureConfig fc;
    fc.posts = 300 + rng.below(1500);
    fc.users = 20 + rng.below(200);
    fc.seed = rng.next();
    auto posts = fixture::synth_clean_posts(fc);
    // coarse timestamps produce ties
    if (trial % 3 == 0) {
      for (auto& p : posts) p.timestamp /= 100000;
    }
    SplitSpec spec;
    spec.seed = rng.next();
    spec.random_test_frac = 0.05 + 0.1 * rng.uniform();
    spec.temporal_test_frac = 0.05 + 0.1 * rng.uniform();
    spec.user_test_frac = 0.05 + 0.1 * rng.uniform();
    spec.dev_frac = 0.05 + 0.1 * rng.uniform();
    CAPTURE(trial);
    const auto r = build_splits(posts, spec);
    check_invariants(posts, r);
  }
}

TEST_CASE("10,000 posts: invariants, determinism and label proportions") {
  fixture::FixtureConfig fc;
  fc.posts = 10000;
  fc.users = 800;
  const auto posts = fixture::synth_clean_posts(fc);
  SplitSpec spec;
  const auto a = build_splits(posts, spec);
  check_invariants(posts, a);
  CHECK(build_splits(posts, spec) == a);

  // input order does not matter
  auto shuffled = posts;
  Rng rng(3);
  rng.shuffle(shuffled);
  CHECK(build_splits(shuffled, spec) == a);

  spec.seed = 43;
  CHECK_FALSE(build_splits(posts, spec) == a);

  std::array<double, kNumLabels> corpus_share{};
  for (const auto& p : posts) corpus_share[index_of(p.label)] += 1.0 / static_cast<double>(posts.size());
  for (Split s : kAllSplits) {
    const auto i = static_cast<std::size_t>(s);
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const double share = static_cast<double>(a.manifest.label_counts[i][k]) / static_cast<double>(a.manifest.sizes[i]);
      CHECK(std::abs(share - corpus_share[k]) < 0.05);
    }
  }
}

TEST_CASE("write_splits emits one file per split plus a manifest") {
  testing::ScratchDir dir("splits");
  const auto posts = grid_corpus(10, 10);
  const auto r = build_splits(posts, SplitSpec{});
  write_splits(dir.str(), posts, r);
  for (Split s : kAllSplits) {
    const auto rows = corpus::read_clean_jsonl(dir / (std::string(split_name(s)) + ".jsonl"));
    REQUIRE(rows.size() == r[s].size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].id == r[s][i]);
  }
  const auto m = jsonl::read_json(dir / "manifest.json");
  CHECK(m.contains("splits"));
}
