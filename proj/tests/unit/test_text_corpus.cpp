#include <doctest.h>

#include <map>
#include <set>

#include "emoid/corpus.hpp"
#include "emoid/fixture.hpp"
#include "emoid/jsonl.hpp"
#include "emoid/text.hpp"
#include "support.hpp"

using namespace emoid;
using namespace emoid::corpus;

namespace {

LanguageDetectorSet votes(bool a, bool b, bool c) {
  return {{LanguageDetector{"a", [a](std::string_view) { return a; }},
           LanguageDetector{"b", [b](std::string_view) { return b; }},
           LanguageDetector{"c", [c](std::string_view) { return c; }}}};
}

LanguageDetectorSet always_english() { return votes(true, true, true); }

RawPost raw(std::string id, std::string user, std::int64_t ts, std::string tag, std::string text) {
  return {std::move(id), std::move(user), ts, std::move(tag), std::move(text)};
}

}  // namespace

TEST_CASE("normalize_text examples") {
  CHECK(text::normalize_text("a\t b\n\nc") == "a b c");
  CHECK(text::normalize_text("") == "");
  CHECK(text::normalize_text("x &amp; <b>y</b>") == "x & y");
  CHECK(text::normalize_text("  lead and trail \r\n") == "lead and trail");
  CHECK(text::normalize_text("keep the <mask> token") == "keep the <mask> token");
}

TEST_CASE("entity decoding covers named, decimal and hex forms") {
  CHECK(text::decode_html_entities("&lt;&gt;&quot;&#39;") == "<>\"'");
  CHECK(text::decode_html_entities("&#38;&#x26;") == "&&");
  CHECK(text::decode_html_entities("&bogus; &#xZZ;") == "&bogus; &#xZZ;");
  CHECK(text::decode_html_entities("caf&eacute;") == "caf\xc3\xa9");
}

TEST_CASE("normalize_text is idempotent and leaves no control runs (property)") {
  Rng rng(11);
  for (int i = 0; i < 3000; ++i) {
    const auto s = testing::messy_text(rng);
    const auto once = text::normalize_text(s);
    CAPTURE(s);
    CHECK(text::normalize_text(once) == once);
    CHECK(once.find_first_of("\t\n\r") == std::string::npos);
    CHECK(once.find("  ") == std::string::npos);
    if (!once.empty()) {
      CHECK(once.front() != ' ');
      CHECK(once.back() != ' ');
    }
  }
}

TEST_CASE("lexical_words strips punctuation and lowercases") {
  const auto w = text::lexical_words("Hello, WORLD!! ... ok");
  REQUIRE(w.size() == 3);
  CHECK(w[0].word == "hello");
  CHECK(w[1].word == "world");
  CHECK(w[2].word == "ok");
  CHECK(w[1].begin == 7);
}

TEST_CASE("language vote is 2-of-3") {
  CHECK(is_english("x", votes(true, true, false)));
  CHECK_FALSE(is_english("x", votes(true, false, false)));
  CHECK(is_english("x", votes(true, true, true)));
  CHECK_FALSE(is_english("x", votes(false, false, false)));
}

TEST_CASE("a throwing detector counts as a no vote") {
  LanguageDetectorSet d = votes(true, true, true);
  d.detectors[0].is_english = [](std::string_view) -> bool { throw std::runtime_error("boom"); };
  CHECK(is_english("x", d));
  d.detectors[1].is_english = [](std::string_view) -> bool { throw std::runtime_error("boom"); };
  CHECK_FALSE(is_english("x", d));
}

TEST_CASE("builtin detectors separate English from other text") {
  const auto d = builtin_detectors();
  CHECK(is_english("i feel so sad about the weekend and my family", d));
  CHECK(is_english("this is making me angry again", d));
  CHECK_FALSE(is_english("el perro de la casa come mucho por la noche", d));
  CHECK_FALSE(is_english("qwrtx zzvbn kkjhg pplmn", d));
  CHECK_FALSE(is_english("je ne sais pas pourquoi la voiture est rouge", d));
  CHECK_FALSE(is_english("der hund ist sehr klein und die katze ist gross", d));
  CHECK(is_english("i do not want to die alone at the party", d));
}

TEST_CASE("tag mapping") {
  const TagMapping m;
  CHECK(m.entries().size() == 22);
  CHECK(map_tag("Annoyed", m) == EmotionLabel::Anger);
  CHECK(map_tag("Excited", m) == EmotionLabel::Happiness);
  CHECK(map_tag("lonely", m) == EmotionLabel::Sadness);
  CHECK(map_tag("Worried", m) == EmotionLabel::Fear);
  CHECK(map_tag("Cuddly", m) == EmotionLabel::Affection);
  CHECK_FALSE(map_tag("Bored", m).has_value());
  TagMapping custom = TagMapping::empty();
  custom.add("meh", EmotionLabel::Sadness);
  CHECK_THROWS_AS(custom.add("MEH", EmotionLabel::Anger), Error);
}

TEST_CASE("length filter counts non-placeholder words") {
  CHECK(passes_length_filter("going for coffee"));
  CHECK_FALSE(passes_length_filter("[LINK] hi there"));
  CHECK_FALSE(passes_length_filter(""));
  CHECK_FALSE(passes_length_filter("@someone https://x.io hi"));
  CHECK(passes_length_filter("@someone hi there friend"));
}

TEST_CASE("dedup keeps the earliest post") {
  std::vector<RawPost> posts{raw("b", "u1", 9, "sad", "same text here"), raw("a", "u2", 5, "sad", "same text here"),
                             raw("c", "u3", 1, "sad", "other text here")};
  const auto f = flag_duplicates_and_memes(posts, 10);
  REQUIRE(f.size() == 3);
  CHECK_FALSE(f[0].keep);
  CHECK(f[0].reason == DropReason::Duplicate);
  CHECK(f[1].keep);
  CHECK(f[2].keep);
}

TEST_CASE("timestamp ties in dedup break by id") {
  std::vector<RawPost> posts{raw("z", "u1", 5, "sad", "t t t"), raw("y", "u2", 5, "sad", "t t t")};
  const auto f = flag_duplicates_and_memes(posts, 10);
  CHECK_FALSE(f[0].keep);
  CHECK(f[1].keep);
}

TEST_CASE("memes posted by at least K users are dropped everywhere") {
  std::vector<RawPost> posts;
  for (int u = 0; u < 12; ++u) posts.push_back(raw("m" + std::to_string(u), "u" + std::to_string(u), u, "sad", "the meme"));
  posts.push_back(raw("x", "u0", 100, "sad", "not a meme"));
  const auto f = flag_duplicates_and_memes(posts, 10);
  for (int i = 0; i < 12; ++i) CHECK(f[i].reason == DropReason::Meme);
  CHECK(f[12].keep);

  // 9 distinct users with K=10: ordinary duplicates, earliest survives
  posts.resize(9);
  const auto g = flag_duplicates_and_memes(posts, 10);
  CHECK(g[0].keep);
  for (int i = 1; i < 9; ++i) CHECK(g[i].reason == DropReason::Duplicate);
}

TEST_CASE("unique texts are all kept") {
  std::vector<RawPost> posts;
  for (int i = 0; i < 100; ++i) posts.push_back(raw("p" + std::to_string(i), "u", i, "sad", "text " + std::to_string(i)));
  for (const auto& f : flag_duplicates_and_memes(posts, 10)) CHECK(f.keep);
}

TEST_CASE("pipeline edge cases") {
  const TagMapping m;
  const auto empty = run_pipeline({}, m, always_english(), {});
  CHECK(empty.posts.empty());
  CHECK(empty.stats == PipelineStats{});

  const auto lang = run_pipeline({raw("a", "u", 1, "sad", "one two three four")}, m, votes(false, false, true), {});
  CHECK(lang.posts.empty());
  CHECK(lang.stats.language_dropped == 1);

  const auto bad = run_pipeline({raw("", "u", 1, "sad", "one two three"), raw("a", "u", -1, "sad", "one two three")},
                                m, always_english(), {});
  CHECK(bad.stats.malformed == 2);
}

TEST_CASE("pipeline stage counts match a rule-by-rule oracle on the fixture") {
  fixture::FixtureConfig fc;
  fc.posts = 1000;
  fc.users = 80;
  fc.dirt = 0.15;
  const auto posts = fixture::synth_raw_posts(fc);
  const TagMapping mapping;
  const auto det = builtin_detectors();
  const PipelineConfig pc;
  const auto got = run_pipeline(posts, mapping, det, pc);

  // oracle: each filter applied on its own, in pipeline order
  PipelineStats want;
  want.input = posts.size();
  std::vector<std::pair<std::size_t, std::string>> survivors;  // index, normalized text
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto t = text::normalize_text(posts[i].text);
    if (!is_english(t, det)) {
      ++want.language_dropped;
    } else if (!mapping.lookup(to_lower(posts[i].tag))) {
      ++want.tag_dropped;
    } else if (!passes_length_filter(t)) {
      ++want.length_dropped;
    } else {
      survivors.emplace_back(i, t);
    }
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (const auto& [i, t] : survivors) groups[t].push_back(i);
  std::set<std::string> kept_ids;
  for (const auto& [t, idx] : groups) {
    std::set<std::string> users;
    for (auto i : idx) users.insert(posts[i].user_id);
    if (users.size() >= pc.meme_k) {
      want.meme_dropped += idx.size();
      continue;
    }
    std::size_t best = idx[0];
    for (auto i : idx) {
      if (std::tie(posts[i].timestamp, posts[i].id) < std::tie(posts[best].timestamp, posts[best].id)) best = i;
    }
    want.duplicate_dropped += idx.size() - 1;
    kept_ids.insert(posts[best].id);
  }
  want.kept = kept_ids.size();

  CHECK(got.stats == want);
  CHECK(want.meme_dropped == 12);
  CHECK(want.language_dropped > 0);
  CHECK(want.tag_dropped > 0);
  CHECK(want.length_dropped > 0);
  CHECK(want.duplicate_dropped > 0);
  std::set<std::string> got_ids;
  for (const auto& p : got.posts) {
    got_ids.insert(p.id);
    CHECK(validate(p) == "");
  }
  CHECK(got_ids == kept_ids);
}

TEST_CASE("file pipeline counts malformed lines and round-trips clean posts") {
  testing::ScratchDir dir("corpus");
  jsonl::write_text(dir / "raw.jsonl",
                    "{\"id\":\"a\",\"user_id\":\"u\",\"timestamp\":3,\"tag\":\"sad\",\"text\":\"so sad about it\"}\n"
                    "not json\n"
                    "{\"id\":\"b\",\"user_id\":\"u\",\"tag\":\"sad\",\"text\":\"missing timestamp here\"}\n"
                    "{\"id\":\"a\",\"user_id\":\"u\",\"timestamp\":4,\"tag\":\"sad\",\"text\":\"repeated id here\"}\n");
  const auto r = run_pipeline_file(dir / "raw.jsonl", TagMapping(), always_english(), {});
  CHECK(r.stats.input == 4);
  CHECK(r.stats.malformed == 3);
  REQUIRE(r.posts.size() == 1);
  write_clean_jsonl(dir / "clean.jsonl", r.posts);
  CHECK(read_clean_jsonl(dir / "clean.jsonl") == r.posts);
}
