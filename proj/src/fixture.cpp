#include "emoid/fixture.hpp"

#include <cstdio>
#include <filesystem>

#include "emoid/jsonl.hpp"
#include "emoid/rng.hpp"

namespace emoid::fixture {

using jsonl::Json;

namespace {

const std::vector<std::vector<std::string>> kMarkers{
    {"sad", "lonely", "miserable", "heartbroken", "tears", "gloomy", "grief", "sorrow"},
    {"angry", "furious", "annoyed", "rage", "outraged", "irritated", "livid", "hate"},
    {"afraid", "scared", "anxious", "terrified", "nervous", "worried", "panic", "dread"},
    {"love", "adore", "cuddle", "darling", "sweetheart", "caring", "hug", "cherish"},
    {"happy", "joyful", "excited", "delighted", "thrilled", "cheerful", "glad", "wonderful"},
};

// Source-style tags per label (a subset of the default tag mapping).
const std::vector<std::vector<std::string>> kTags{
    {"sad", "lonely", "miserable"},
    {"angry", "annoyed", "frustrated", "furious"},
    {"anxious", "afraid", "nervous", "worried"},
    {"loving", "caring", "affectionate", "adoring"},
    {"happy", "excited"},
};

const std::vector<std::string> kNouns{
    "work",    "weekend", "phone",   "house",  "dinner", "school",  "morning", "family", "class",
    "bus",     "game",    "coffee",  "exam",   "boss",   "sister",  "brother", "movie",  "party",
    "job",     "car",     "rain",    "night",  "city",   "teacher", "dog",     "cat",    "trip",
    "meeting", "project", "neighbor", "kitchen", "garden", "music", "book",    "friend", "road"};

const std::vector<std::string> kTemplates{
    "i feel so {m} about the {n} today",
    "my {n} made me {m} and i do not know why",
    "this {n} is making me {m} again",
    "honestly so {m} right now, the {n} and the {n} all week",
    "why am i always {m} when the {n} is here",
    "just {m}. the {n} was {m} too",
    "{m} {m} {m} because of the {n} at {n}",
    "it is the {n} again and i am {m}",
    "so {m} that my {n} is not coming back to the {n}",
    "feeling {m} after the {n} with my {n}",
    "i was {m} all day and the {n} did not help",
    "can not stop being {m} about the {n}",
};

const std::vector<std::string> kForeign{
    "el perro de la casa come mucho por la noche",
    "je ne sais pas pourquoi la voiture est rouge",
    "der hund ist sehr klein und die katze ist gross",
    "qwrtx zzvbn kkjhg pplmn",
};

const std::vector<std::string> kSituations{
    "my dog died",         "i passed the exam",       "my friend lied to me",  "i was alone at night",
    "the bus left without me", "my sister visited",   "i lost my wallet",      "someone followed me home",
    "i got the job",       "my boss shouted at me",   "the house was empty",   "i heard a noise outside",
};

std::string fill(const std::string& tmpl, Rng& rng, const std::vector<std::string>& markers) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 3, "{m}") == 0) {
      out += markers[rng.below(markers.size())];
      i += 3;
    } else if (tmpl.compare(i, 3, "{n}") == 0) {
      out += kNouns[rng.below(kNouns.size())];
      i += 3;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

// Heavier users post more; roughly a quadratic skew.
std::size_t pick_user(Rng& rng, std::size_t users) {
  const double u = rng.uniform();
  return std::min(users - 1, static_cast<std::size_t>(u * u * static_cast<double>(users)));
}

std::string id_of(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, i);
  return buf;
}

struct Draft {
  std::size_t label = 0;
  std::string text;
};

Draft draft_post(Rng& rng, double label_noise) {
  Draft d;
  d.label = rng.below(kNumLabels);
  std::size_t marker_label = d.label;
  if (rng.bernoulli(label_noise)) marker_label = rng.below(kNumLabels);
  d.text = fill(kTemplates[rng.below(kTemplates.size())], rng, kMarkers[marker_label]);
  return d;
}

}  // namespace

const std::vector<std::vector<std::string>>& marker_words() { return kMarkers; }

std::vector<corpus::RawPost> synth_raw_posts(const FixtureConfig& cfg) {
  if (cfg.users == 0) throw Error("fixture needs at least one user");
  Rng rng(cfg.seed);
  std::vector<corpus::RawPost> out;
  out.reserve(cfg.posts);
  const std::int64_t step = std::max<std::int64_t>(1, cfg.span_s / static_cast<std::int64_t>(std::max<std::size_t>(cfg.posts, 1)));
  std::size_t meme_left = cfg.posts >= 200 ? 12 : 0;
  const std::size_t meme_stride = std::max<std::size_t>(1, cfg.posts / 13);
  const std::string meme = "when the monday hits you like a truck and the coffee is gone";
  for (std::size_t i = 0; i < cfg.posts; ++i) {
    corpus::RawPost p;
    p.id = id_of('p', i);
    p.user_id = id_of('u', pick_user(rng, cfg.users));
    p.timestamp = cfg.start_ts + static_cast<std::int64_t>(i) * step + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(step)));
    Draft d = draft_post(rng, cfg.label_noise);
    p.tag = kTags[d.label][rng.below(kTags[d.label].size())];
    p.text = std::move(d.text);

    if (meme_left > 0 && i % meme_stride == meme_stride / 2) {
      p.user_id = id_of('m', meme_left);  // distinct posters
      p.text = meme;
      --meme_left;
    } else if (rng.bernoulli(cfg.dirt)) {
      switch (rng.below(5)) {
        case 0: p.text = kForeign[rng.below(kForeign.size())]; break;
        case 1: p.tag = "bored"; break;
        case 2: p.text = kMarkers[d.label][0] + "!!"; break;
        case 3:
          if (!out.empty()) p.text = out[rng.below(out.size())].text;
          break;
        default: p.text = "<b>" + p.text + "</b> &amp; [LINK] @someone https://example.com/x"; break;
      }
    } else if (rng.bernoulli(0.05)) {
      p.text += " &lt;3 https://t.co/abc @friend";
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<corpus::CleanPost> synth_clean_posts(const FixtureConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<corpus::CleanPost> out;
  out.reserve(cfg.posts);
  const std::int64_t step = std::max<std::int64_t>(1, cfg.span_s / static_cast<std::int64_t>(std::max<std::size_t>(cfg.posts, 1)));
  for (std::size_t i = 0; i < cfg.posts; ++i) {
    corpus::CleanPost p;
    p.id = id_of('p', i);
    p.user_id = id_of('u', pick_user(rng, cfg.users));
    p.timestamp = cfg.start_ts + static_cast<std::int64_t>(i) * step;
    Draft d = draft_post(rng, cfg.label_noise);
    p.label = kAllLabels[d.label];
    p.text = std::move(d.text);
    out.push_back(std::move(p));
  }
  return out;
}

lexicon::EmotionLexicon synth_lexicon() {
  lexicon::EmotionLexicon lex;
  const char* cats[] = {"sadness", "anger", "fear", nullptr, "positive"};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    for (const auto& w : kMarkers[k]) {
      if (cats[k] != nullptr) lex.add(w, cats[k]);
      if (k <= 2) lex.add(w, "negative");
    }
  }
  // Some affection words carry positive sentiment only.
  for (auto w : {"love", "adore", "cherish", "caring"}) lex.add(w, "positive");
  for (auto w : {"ashamed", "guilty", "disgusted", "shame"}) lex.add(w, "negative");
  return lex;
}

std::vector<OodItem> synth_ood(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> labels{"sadness", "anger", "fear", "affection", "joy", "surprise"};
  const std::vector<std::string> surprise{"shocked", "stunned", "unexpected", "wow"};
  const std::vector<std::string> frames{"reading about the {n} left me {m}", "the {n} news was {m} for everyone",
                                        "{m} feeling about the {n} this morning", "what a {m} {n} that was"};
  std::vector<OodItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.below(labels.size());
    const auto& words = k == 5 ? surprise : kMarkers[k == 4 ? 4 : k];
    out.push_back({fill(frames[rng.below(frames.size())], rng, words), labels[k]});
  }
  return out;
}

std::vector<OodItem> synth_enisear(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  struct E {
    const char* word;
    const char* label;
  };
  const std::vector<E> emotions{{"sad", "sadness"},   {"miserable", "sadness"}, {"angry", "anger"},
                                {"furious", "anger"}, {"afraid", "fear"},        {"scared", "fear"},
                                {"happy", "joy"},     {"delighted", "joy"},      {"ashamed", "shame"},
                                {"guilty", "guilt"},  {"disgusted", "disgust"}};
  const std::vector<std::string> modifiers{"", "", "", "very ", "really ", "deeply "};
  std::vector<OodItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = emotions[rng.below(emotions.size())];
    const char* conj = rng.bernoulli(0.5) ? "when" : "because";
    out.push_back({"I felt " + modifiers[rng.below(modifiers.size())] + e.word + " " + conj + " " +
                       kSituations[rng.below(kSituations.size())],
                   e.label});
  }
  return out;
}

void write_fixture(const std::string& dir, const FixtureConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::vector<Json> rows;
  for (const auto& p : synth_raw_posts(cfg)) {
    rows.push_back({{"id", p.id}, {"user_id", p.user_id}, {"timestamp", p.timestamp}, {"tag", p.tag}, {"text", p.text}});
  }
  jsonl::write_all(dir + "/raw.jsonl", rows);
  lexicon::save_lexicon(dir + "/lexicon.tsv", synth_lexicon());
  jsonl::write_json(dir + "/cmap.json",
                    Json{{"anger", "Anger"}, {"fear", "Fear"}, {"sadness", "Sadness"}, {"positive", "Happiness"}});
  rows.clear();
  for (const auto& o : synth_ood(400, derive_seed(cfg.seed, 1))) rows.push_back({{"text", o.text}, {"label", o.label}});
  jsonl::write_all(dir + "/ood.jsonl", rows);
  rows.clear();
  for (const auto& o : synth_enisear(200, derive_seed(cfg.seed, 2))) rows.push_back({{"text", o.text}, {"label", o.label}});
  jsonl::write_all(dir + "/enisear.jsonl", rows);
}

}  // namespace emoid::fixture
