#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "emoid/evaluation.hpp"
#include "emoid/jsonl.hpp"
#include "support.hpp"

using namespace emoid;
using namespace emoid::eval;

namespace {

using L = EmotionLabel;

// Textbook F1 straight from confusion counts.
double brute_macro(const std::vector<L>& g, const std::vector<L>& p, const std::vector<L>& set) {
  double sum = 0;
  for (auto c : set) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      tp += g[i] == c && p[i] == c;
      fp += g[i] != c && p[i] == c;
      fn += g[i] == c && p[i] != c;
    }
    const double prec = tp + fp == 0 ? 0 : tp / (tp + fp);
    const double rec = tp + fn == 0 ? 0 : tp / (tp + fn);
    sum += prec + rec == 0 ? 0 : 2 * prec * rec / (prec + rec);
  }
  return 100.0 * sum / static_cast<double>(set.size());
}

// Same, but classes that never occur in the sample are skipped (resample rule).
double resample_macro(const std::vector<L>& g, const std::vector<L>& p, const std::vector<L>& set) {
  std::vector<L> present;
  for (auto c : set) {
    const bool seen = std::find(g.begin(), g.end(), c) != g.end() || std::find(p.begin(), p.end(), c) != p.end();
    if (seen) present.push_back(c);
  }
  return brute_macro(g, p, present);
}

double interp_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - (pos - lo)) + v[lo + 1] * (pos - lo);
}

}  // namespace

TEST_CASE("macro F1 worked example") {
  const std::vector<L> g{L::Sadness, L::Sadness, L::Anger, L::Anger, L::Fear};
  const std::vector<L> p{L::Sadness, L::Anger, L::Anger, L::Anger, L::Fear};
  const std::vector<L> set{L::Sadness, L::Anger, L::Fear};
  const auto s = macro_f1(g, p, set);
  // Sadness 2/3, Anger 4/5, Fear 1
  CHECK(s.per_class.at(L::Sadness) == doctest::Approx(200.0 / 3.0));
  CHECK(s.per_class.at(L::Anger) == doctest::Approx(80.0));
  CHECK(s.per_class.at(L::Fear) == doctest::Approx(100.0));
  CHECK(s.macro == doctest::Approx((200.0 / 3.0 + 80.0 + 100.0) / 3.0));

  // an absent class with no predictions scores 0 and still counts
  const auto wide = macro_f1(g, p, kAllLabels);
  CHECK(wide.per_class.at(L::Happiness) == 0.0);
  CHECK(wide.macro == doctest::Approx((200.0 / 3.0 + 80.0 + 100.0) / 5.0));

  CHECK_THROWS_AS(macro_f1(g, std::vector<L>{L::Sadness}, set), Error);
  CHECK_THROWS_AS(macro_f1(std::vector<L>{L::Affection}, std::vector<L>{L::Affection}, set), Error);
  CHECK_THROWS_AS(macro_f1(std::vector<L>{}, std::vector<L>{}, set), Error);
}

TEST_CASE("macro F1 agrees with brute force (property)") {
  Rng rng(21);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(60);
    const auto g = testing::random_labels(rng, n, kNumLabels);
    const auto p = testing::random_labels(rng, n, kNumLabels);
    const auto s = macro_f1(g, p, kAllLabels);
    CHECK(s.macro == doctest::Approx(brute_macro(g, p, {kAllLabels.begin(), kAllLabels.end()})).epsilon(1e-12));
    CHECK(s.macro >= 0.0);
    CHECK(s.macro <= 100.0);
  }
}

TEST_CASE("bootstrap of a perfect predictor is [100, 100] for any seed") {
  Rng rng(31);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // every declared class occurs, otherwise the point estimate is below 100
    auto g = testing::random_labels(rng, rng.below(30), kNumLabels);
    g.insert(g.end(), kAllLabels.begin(), kAllLabels.end());
    rng.shuffle(g);
    const auto r = bootstrap_ci(g, g, kAllLabels, 200, 0.95, seed);
    CHECK(r.point.macro == 100.0);
    CHECK(r.macro.low == 100.0);
    CHECK(r.macro.high == 100.0);
    for (auto l : kAllLabels) CHECK(r.per_class.at(l).low == 100.0);
  }
}

TEST_CASE("bootstrap matches enumerated resamples") {
  const std::vector<L> g{L::Sadness, L::Anger};
  const std::vector<L> p{L::Sadness, L::Sadness};
  const std::vector<L> set{L::Sadness, L::Anger};
  const std::size_t B = 4;
  const std::uint64_t seed = 17;
  std::vector<double> reps;
  for (std::size_t b = 0; b < B; ++b) {
    const auto idx = bootstrap_indices(2, seed, b);
    std::vector<L> gb, pb;
    for (auto i : idx) {
      CHECK(i < 2);
      gb.push_back(g[i]);
      pb.push_back(p[i]);
    }
    reps.push_back(resample_macro(gb, pb, set));
  }
  const double point = brute_macro(g, p, set);
  const auto r = bootstrap_ci(g, p, set, B, 0.95, seed);
  CHECK(r.point.macro == doctest::Approx(point));
  CHECK(r.macro.low == doctest::Approx(std::min(interp_percentile(reps, 0.025), point)));
  CHECK(r.macro.high == doctest::Approx(std::max(interp_percentile(reps, 0.975), point)));
  CHECK(bootstrap_indices(2, seed, 0) == bootstrap_indices(2, seed, 0));
}

TEST_CASE("bootstrap intervals shrink with more data and contain the point") {
  Rng rng(5);
  auto noisy = [&](std::size_t n) {
    std::vector<L> g, p;
    for (std::size_t i = 0; i < n; ++i) {
      g.push_back(kAllLabels[rng.below(kNumLabels)]);
      p.push_back(rng.bernoulli(0.7) ? g.back() : kAllLabels[rng.below(kNumLabels)]);
    }
    return std::pair{g, p};
  };
  const auto [gs, ps] = noisy(50);
  const auto [gl, pl] = noisy(5000);
  const auto small = bootstrap_ci(gs, ps, kAllLabels, 400, 0.95, 1);
  const auto large = bootstrap_ci(gl, pl, kAllLabels, 400, 0.95, 1);
  CHECK(small.macro.high - small.macro.low >= large.macro.high - large.macro.low);
  for (const auto* r : {&small, &large}) {
    CHECK(r->macro.low <= r->point.macro);
    CHECK(r->point.macro <= r->macro.high);
    for (auto l : kAllLabels) {
      CHECK(r->per_class.at(l).low <= r->point.per_class.at(l));
      CHECK(r->point.per_class.at(l) <= r->per_class.at(l).high);
    }
  }
  CHECK_THROWS_AS(bootstrap_ci(gs, ps, kAllLabels, 10, 1.0, 1), Error);
}

TEST_CASE("percentile interpolates linearly") {
  std::vector<double> v{4, 1, 3, 2};
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);
  CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
  std::vector<double> one{7};
  CHECK(percentile(one, 0.3) == 7.0);
  std::vector<double> none;
  CHECK_THROWS_AS(percentile(none, 0.5), Error);
}

TEST_CASE("out-of-domain label mapping") {
  CHECK(map_ood_labels("joy") == L::Happiness);
  CHECK(map_ood_labels("Happiness") == L::Happiness);
  CHECK(map_ood_labels(" affection ") == L::Happiness);
  CHECK(map_ood_labels("sadness") == L::Sadness);
  CHECK(map_ood_labels("ANGER") == L::Anger);
  CHECK(map_ood_labels("fear") == L::Fear);
  for (const char* other : {"surprise", "disgust", "shame", "guilt", "neutral", "love", ""}) {
    CAPTURE(other);
    CHECK_FALSE(map_ood_labels(other).has_value());
  }
}

TEST_CASE("template sentences get their emotion word masked") {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"I felt sad when my dog died", "I felt <mask> when my dog died"},
      {"I felt angry because he lied", "I felt <mask> because he lied"},
      {"i felt scared when i was alone", "i felt <mask> when i was alone"},
      {"I felt happy when I passed the exam.", "I felt <mask> when I passed the exam."},
      {"I felt very sad when she left", "I felt very <mask> when she left"},
      {"I felt really quite angry because of it", "I felt really quite <mask> because of it"},
      {"I felt sad and angry when it broke", "I felt sad and <mask> when it broke"},
      {"I felt bleh when it rained", "I felt <mask> when it rained"},
      {"I felt ashamed, when caught", "I felt <mask>, when caught"},
      {"  I felt guilty because I forgot", "  I felt <mask> because I forgot"},
      {"I FELT AFRAID WHEN THE LIGHTS WENT OUT", "I FELT <mask> WHEN THE LIGHTS WENT OUT"},
      {"I felt so so lonely when they moved", "I felt so so <mask> when they moved"},
      {"I felt disgusted when I saw it", "I felt <mask> when I saw it"},
      {"I felt terribly nervous because of the exam", "I felt terribly <mask> because of the exam"},
      {"I felt joy when the baby was born", "I felt <mask> when the baby was born"},
      {"I felt fear when the dog barked", "I felt <mask> when the dog barked"},
      {"I felt a bit upset because he was late", "I felt a bit <mask> because he was late"},
      {"I felt proud when I won", "I felt <mask> when I won"},
      {"I felt grateful because they helped", "I felt <mask> because they helped"},
      {"I felt shocked when I heard", "I felt <mask> when I heard"},
  };
  for (const auto& [in, want] : cases) {
    CAPTURE(in);
    const auto r = prepare_enisear(in);
    CHECK(r.matched);
    CHECK(r.text == want);
    CHECK(prepare_enisear(r.text).text == r.text);
  }
  const auto miss = prepare_enisear("nothing like the frame");
  CHECK_FALSE(miss.matched);
  CHECK(miss.text == "nothing like the frame");

  // a lexicon extends the known emotion words
  lexicon::EmotionLexicon lex;
  lex.add("blue", "sadness");
  CHECK(prepare_enisear("I felt blue today when it rained").text == "I felt blue <mask> when it rained");
  CHECK(prepare_enisear("I felt blue today when it rained", &lex).text == "I felt <mask> today when it rained");
}

TEST_CASE("average rank with ties") {
  const std::map<std::string, std::map<std::string, double>> s{
      {"a", {{"x", 1.0}, {"y", 5.0}}}, {"b", {{"x", 1.0}, {"y", 3.0}}}, {"c", {{"x", 0.5}, {"y", 4.0}}}};
  const auto r = average_rank(s);
  CHECK(r.at("a") == doctest::Approx((1.5 + 1.0) / 2));
  CHECK(r.at("b") == doctest::Approx((1.5 + 3.0) / 2));
  CHECK(r.at("c") == doctest::Approx((3.0 + 2.0) / 2));
  CHECK_THROWS_AS(average_rank({{"a", {{"x", 1.0}}}, {"b", {{"y", 1.0}}}}), Error);
}

TEST_CASE("average rank property: ranks sum to m(m+1)/2 per dataset") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = 1 + rng.below(6), d = 1 + rng.below(5);
    std::map<std::string, std::map<std::string, double>> s;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) s["m" + std::to_string(i)]["d" + std::to_string(j)] = rng.below(4);
    double sum = 0;
    for (const auto& [_, v] : average_rank(s)) {
      CHECK(v >= 1.0);
      CHECK(v <= static_cast<double>(m));
      sum += v;
    }
    CHECK(sum == doctest::Approx(m * (m + 1) / 2.0));
  }
}

TEST_CASE("average rank on the reference score tables") {
  // in-domain, three split regimes, ranked within each size group
  const auto base = average_rank({{"base", {{"user", 72.82}, {"temporal", 72.85}, {"random", 72.92}}},
                                  {"base+emlm", {{"user", 72.87}, {"temporal", 72.91}, {"random", 73.0}}},
                                  {"emlm+soup", {{"user", 72.92}, {"temporal", 73.03}, {"random", 73.02}}}});
  CHECK(base.at("base") == doctest::Approx(3.0));
  CHECK(base.at("base+emlm") == doctest::Approx(2.0));
  CHECK(base.at("emlm+soup") == doctest::Approx(1.0));
  const auto large = average_rank({{"large", {{"user", 73.03}, {"temporal", 73.0}, {"random", 73.19}}},
                                   {"large+emlm", {{"user", 73.19}, {"temporal", 73.14}, {"random", 73.37}}},
                                   {"emlm+soup", {{"user", 73.37}, {"temporal", 73.43}, {"random", 73.57}}}});
  CHECK(large.at("large") == doctest::Approx(3.0));
  CHECK(large.at("large+emlm") == doctest::Approx(2.0));
  CHECK(large.at("emlm+soup") == doctest::Approx(1.0));

  // out-of-domain, five datasets
  auto row = [](double a, double b, double c, double d, double e) {
    return std::map<std::string, double>{{"uj", a}, {"goe", b}, {"tec", c}, {"semeval", d}, {"enisear", e}};
  };
  const auto ood_large = average_rank({{"large", row(51.87, 45.51, 44.08, 68.75, 80.49)},
                                       {"large+emlm", row(52.28, 46.94, 43.78, 69.02, 80.09)},
                                       {"emlm+soup", row(54.17, 45.75, 44.12, 70.04, 79.94)}});
  CHECK(ood_large.at("large") == doctest::Approx(2.4));
  CHECK(ood_large.at("large+emlm") == doctest::Approx(2.0));
  CHECK(ood_large.at("emlm+soup") == doctest::Approx(1.6));
  // the base group as recomputed from its scores
  const auto ood_base = average_rank({{"base", row(52.40, 47.16, 43.68, 69.70, 67.23)},
                                      {"base+emlm", row(52.07, 46.26, 42.43, 70.45, 74.79)},
                                      {"emlm+soup", row(54.18, 46.31, 43.87, 71.68, 70.37)}});
  CHECK(ood_base.at("base") == doctest::Approx(2.2));
  CHECK(ood_base.at("base+emlm") == doctest::Approx(2.4));
  CHECK(ood_base.at("emlm+soup") == doctest::Approx(1.4));
}

TEST_CASE("error sampling") {
  std::vector<LabeledPrediction> preds;
  for (std::size_t i = 0; i < 300; ++i) {
    LabeledPrediction p;
    p.id = "p" + std::to_string(i);
    p.gold = kAllLabels[i % kNumLabels];
    p.pred = i % 3 == 0 ? p.gold : kAllLabels[(i + 1) % kNumLabels];
    preds.push_back(p);
  }
  const auto s = sample_errors(preds, 10, 9);
  CHECK(s.size() == 50);
  std::map<L, std::size_t> per;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].gold != s[i].pred);
    ++per[s[i].gold];
    ids.insert(s[i].id);
    if (i > 0) {
      CHECK(index_of(s[i - 1].gold) <= index_of(s[i].gold));
      if (s[i - 1].gold == s[i].gold) CHECK(std::stoi(s[i - 1].id.substr(1)) < std::stoi(s[i].id.substr(1)));
    }
  }
  CHECK(ids.size() == 50);
  for (auto l : kAllLabels) CHECK(per[l] == 10);
  CHECK(sample_errors(preds, 10, 9) == s);

  // fewer errors than requested: all of them
  const auto all = sample_errors(preds, 1000, 9);
  CHECK(all.size() == 200);

  for (auto& p : preds) p.pred = p.gold;
  CHECK(sample_errors(preds, 10, 9).empty());
}

TEST_CASE("report emitters and prediction files") {
  const std::vector<L> g{L::Sadness, L::Anger, L::Anger};
  const std::vector<L> p{L::Sadness, L::Anger, L::Sadness};
  const std::vector<EvalReport> reports{evaluate("user", "base", g, p, kAllLabels, 50, 1),
                                        evaluate("random", "base", g, g, kAllLabels, 50, 1),
                                        evaluate("user", "nbsvm", g, g, kAllLabels, 50, 1)};
  const auto csv = macro_table_csv(reports);
  CHECK(csv.rfind("model,dataset,n,macro_f1,ci_low,ci_high\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto md = macro_table_markdown(reports);
  CHECK(md.find("| Model | user | random |") != std::string::npos);
  CHECK(md.find(" - |") != std::string::npos);  // nbsvm has no random-split row
  const auto per = per_class_csv(reports);
  CHECK(std::count(per.begin(), per.end(), '\n') == 1 + 3 * 5);
  const auto j = report_json(reports[0]);
  CHECK(j["n"] == 3);
  CHECK(j["macro_f1"]["f1"].get<double>() == doctest::Approx(reports[0].scores.point.macro));
  CHECK(j["per_class"].size() == 5);

  testing::ScratchDir dir("preds");
  std::vector<LabeledPrediction> lp{{"a", L::Fear, L::Anger, "user", "text one"}, {"b", L::Happiness, L::Happiness, "", ""}};
  write_predictions_jsonl(dir / "p.jsonl", lp);
  const auto back = read_predictions_jsonl(dir / "p.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].gold == L::Fear);
  CHECK(back[0].pred == L::Anger);
  CHECK(back[1].pred == L::Happiness);
}
