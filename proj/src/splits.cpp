#include "emoid/splits.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <unordered_set>

#include "emoid/jsonl.hpp"
#include "emoid/rng.hpp"

namespace emoid::splits {

using jsonl::Json;

void SplitSpec::validate() const {
  for (double f : {random_test_frac, user_test_frac, temporal_test_frac, dev_frac}) {
    if (!(f > 0.0 && f < 1.0)) throw Error("split fractions must lie in (0,1)");
  }
  if (random_test_frac + user_test_frac + temporal_test_frac + dev_frac >= 1.0)
    throw Error("split fractions must sum to less than 1");
}

SplitSpec SplitSpec::from_json_file(const std::string& path) {
  const Json j = jsonl::read_json(path);
  SplitSpec s;
  s.random_test_frac = j.value("random_test_frac", s.random_test_frac);
  s.user_test_frac = j.value("user_test_frac", s.user_test_frac);
  s.temporal_test_frac = j.value("temporal_test_frac", s.temporal_test_frac);
  s.dev_frac = j.value("dev_frac", s.dev_frac);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::UserTest: return "user_test";
    case Split::TemporalTest: return "temporal_test";
    case Split::RandomTest: return "random_test";
  }
  return "?";
}

namespace {

std::size_t round_count(double frac, std::size_t n) {
  return static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
}

// Draws `k` members of `pool` uniformly; returns them and leaves the rest in `pool`.
std::vector<std::size_t> take_sample(std::vector<std::size_t>& pool, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> shuffled = pool;
  rng.shuffle(shuffled);
  std::vector<std::size_t> taken(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(taken.begin(), taken.end());
  std::vector<std::size_t> rest;
  std::set_difference(pool.begin(), pool.end(), taken.begin(), taken.end(), std::back_inserter(rest));
  pool = std::move(rest);
  return taken;
}

}  // namespace

SplitResult build_splits(const std::vector<corpus::CleanPost>& posts, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = posts.size();
  if (n == 0) throw Error("cannot split an empty corpus");

  // Positions in chronological order; ties broken by id so the cut is exact.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (posts[a].timestamp != posts[b].timestamp) return posts[a].timestamp < posts[b].timestamp;
    return posts[a].id < posts[b].id;
  });

  // All bookkeeping below is over ranks in `order`, so outputs do not depend
  // on input order.
  std::vector<Split> assign(n, Split::Train);
  std::vector<bool> boundary(n, false);

  const std::size_t n_temporal = round_count(spec.temporal_test_frac, n);
  if (n_temporal == 0 || n_temporal >= n) throw Error("temporal test split would be empty or take everything");
  const std::size_t cut = n - n_temporal;
  for (std::size_t r = cut; r < n; ++r) assign[r] = Split::TemporalTest;
  const auto boundary_ts = posts[order[cut]].timestamp;
  for (std::size_t r = cut; r-- > 0 && posts[order[r]].timestamp == boundary_ts;) boundary[r] = true;

  std::set<std::string> user_set;
  for (const auto& p : posts) user_set.insert(p.user_id);
  std::vector<std::string> users(user_set.begin(), user_set.end());
  Rng user_rng(derive_seed(spec.seed, 0));
  user_rng.shuffle(users);
  const std::size_t n_users = std::max<std::size_t>(1, round_count(spec.user_test_frac, users.size()));
  const std::unordered_set<std::string> sampled(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_users));

  std::vector<std::size_t> pool;
  std::size_t n_user_posts = 0;
  for (std::size_t r = 0; r < cut; ++r) {
    if (sampled.count(posts[order[r]].user_id)) {
      assign[r] = Split::UserTest;
      ++n_user_posts;
    } else {
      pool.push_back(r);
    }
  }
  if (n_user_posts == 0) throw Error("user test split would be empty");

  const std::size_t n_random = round_count(spec.random_test_frac, n);
  if (n_random == 0 || n_random >= pool.size()) throw Error("random test split would be empty or exhaust the corpus");
  for (auto r : take_sample(pool, n_random, derive_seed(spec.seed, 1))) assign[r] = Split::RandomTest;

  const std::size_t n_dev = round_count(spec.dev_frac, pool.size());
  if (n_dev == 0 || n_dev >= pool.size()) throw Error("dev split would be empty or exhaust the remainder");
  for (auto r : take_sample(pool, n_dev, derive_seed(spec.seed, 2))) assign[r] = Split::Dev;

  SplitResult result;
  auto& m = result.manifest;
  for (std::size_t r = 0; r < n; ++r) {
    if (assign[r] == Split::Train && boundary[r]) {
      ++m.boundary_excluded;
      continue;
    }
    const auto s = static_cast<std::size_t>(assign[r]);
    const auto& p = posts[order[r]];
    result.ids[s].push_back(p.id);
    ++m.sizes[s];
    ++m.label_counts[s][index_of(p.label)];
  }
  if (result[Split::Train].empty()) throw Error("train split would be empty");

  m.users_total = users.size();
  m.users_sampled = n_users;
  m.user_test_post_fraction = static_cast<double>(n_user_posts) / static_cast<double>(n);
  return result;
}

std::string manifest_json(const SplitManifest& m) {
  Json j;
  Json splits = Json::array();
  for (Split s : kAllSplits) {
    const auto i = static_cast<std::size_t>(s);
    Json row;
    row["split"] = std::string(split_name(s));
    row["size"] = m.sizes[i];
    Json counts = Json::object();
    Json props = Json::object();
    for (EmotionLabel l : kAllLabels) {
      const auto c = m.label_counts[i][index_of(l)];
      counts[std::string(label_name(l))] = c;
      props[std::string(label_name(l))] =
          m.sizes[i] == 0 ? 0.0 : std::round(1e4 * static_cast<double>(c) / static_cast<double>(m.sizes[i])) / 1e4;
    }
    row["label_counts"] = counts;
    row["label_proportions"] = props;
    splits.push_back(row);
  }
  j["splits"] = splits;
  j["users_total"] = m.users_total;
  j["users_sampled"] = m.users_sampled;
  j["user_test_post_fraction"] = m.user_test_post_fraction;
  j["boundary_excluded"] = m.boundary_excluded;
  return j.dump(2) + "\n";
}

void write_splits(const std::string& out_dir, const std::vector<corpus::CleanPost>& posts,
                  const SplitResult& result) {
  std::unordered_map<std::string_view, const corpus::CleanPost*> by_id;
  for (const auto& p : posts) by_id.emplace(p.id, &p);
  for (Split s : kAllSplits) {
    std::vector<corpus::CleanPost> rows;
    for (const auto& id : result[s]) rows.push_back(*by_id.at(id));
    corpus::write_clean_jsonl((std::filesystem::path(out_dir) / (std::string(split_name(s)) + ".jsonl")).string(), rows);
  }
  jsonl::write_text((std::filesystem::path(out_dir) / "manifest.json").string(), manifest_json(result.manifest));
}

}  // namespace emoid::splits
