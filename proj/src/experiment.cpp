#include "emoid/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "emoid/checkpoint.hpp"
#include "emoid/corpus.hpp"
#include "emoid/evaluation.hpp"
#include "emoid/hash.hpp"
#include "emoid/jsonl.hpp"
#include "emoid/lexicon.hpp"

namespace emoid::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

std::string file_sha(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

std::string hash_of(const json& j) { return sha256_hex(j.dump()); }

model::LabeledData labeled(const std::vector<corpus::CleanPost>& posts) {
  model::LabeledData d;
  for (const auto& p : posts) {
    d.texts.push_back(p.text);
    d.labels.push_back(p.label);
  }
  return d;
}

void write_log(const std::string& path, const model::TrainLog& log) {
  std::vector<json> rows;
  for (const auto& e : log) rows.push_back({{"stage", e.stage}, {"step", e.step}, {"loss", e.loss}, {"metric", e.metric}});
  jsonl::write_all(path, rows);
}

// Runs stages in order, skipping those whose marker carries the same hash.
class StageRunner {
 public:
  StageRunner(const RunOptions& opts, RunSummary& summary, std::string config_hash, std::string log_path)
      : opts_(opts), summary_(summary), config_hash_(std::move(config_hash)), log_path_(std::move(log_path)) {}

  bool stopped() const { return stopped_; }

  void run(const std::string& name, const std::string& dir, const std::string& hash, const std::function<void()>& body) {
    if (stopped_) return;
    const auto marker = fs::path(dir) / "stage.json";
    bool cached = false;
    if (!opts_.force && fs::exists(marker)) {
      try {
        cached = jsonl::read_json(marker.string()).value("hash", "") == hash;
      } catch (const std::exception&) {
        cached = false;
      }
    }
    if (cached) {
      spdlog::info("stage {}: cached ({})", name, hash.substr(0, 12));
    } else {
      fs::remove(marker);
      spdlog::info("stage {}: running", name);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        body();
      } catch (const std::exception& e) {
        spdlog::error("stage {} failed: {}", name, e.what());
        throw Error("stage '" + name + "' failed: " + e.what() + " (log: " + log_path_ + ")");
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      spdlog::info("stage {}: done in {:.1f}s", name, secs);
      jsonl::write_json(marker.string(), json{{"stage", name},
                                              {"hash", hash},
                                              {"config_hash", config_hash_},
                                              {"code_version", std::string(code_version())}});
    }
    summary_.stages.push_back({name, hash, cached});
    if (opts_.stop_after && *opts_.stop_after == name) stopped_ = true;
  }

 private:
  const RunOptions& opts_;
  RunSummary& summary_;
  std::string config_hash_;
  std::string log_path_;
  bool stopped_ = false;
};

// Swaps the default logger for console + run-log file for the duration of a run.
class RunLogger {
 public:
  explicit RunLogger(const std::string& path) : previous_(spdlog::default_logger()) {
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path, false);
    auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    auto logger = std::make_shared<spdlog::logger>("run", spdlog::sinks_init_list{console, file});
    logger->set_level(previous_->level());
    logger->flush_on(spdlog::level::info);
    spdlog::set_default_logger(logger);
  }
  ~RunLogger() { spdlog::set_default_logger(previous_); }
  RunLogger(const RunLogger&) = delete;
  RunLogger& operator=(const RunLogger&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

std::vector<corpus::CleanPost> read_split(const std::string& dir, splits::Split s) {
  return corpus::read_clean_jsonl((fs::path(dir) / (std::string(splits::split_name(s)) + ".jsonl")).string());
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"preprocess",    "split",         "pretrain_base", "pretrain_emlm",
                                              "probe_base",    "probe_emlm",    "finetune_base", "finetune_emlm",
                                              "soup",          "evaluate"};
  return names;
}

ExperimentConfig ExperimentConfig::load(const std::string& ini_path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(ini_path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("cannot parse config: " + std::string(e.what()));
  }
  const fs::path base = fs::absolute(ini_path).parent_path();
  ExperimentConfig c;
  auto get = [&](const std::string& key, auto fallback) { return tree.get<decltype(fallback)>(key, fallback); };

  c.seed = get("run.seed", c.seed);
  c.paths.corpus = resolve(base, get("paths.corpus", std::string()));
  c.paths.lexicon = resolve(base, get("paths.lexicon", std::string()));
  c.paths.cmap = resolve(base, get("paths.cmap", std::string()));
  c.paths.tags = resolve(base, get("paths.tags", std::string()));

  const std::string run_dir = get("paths.run_dir", std::string("runs/default"));
  const char* root = std::getenv("EMOID_RUN_ROOT");
  c.paths.run_dir = resolve(root != nullptr && *root != '\0' ? fs::path(root) : base, run_dir);
  const fs::path rd(c.paths.run_dir);
  c.paths.splits_dir = resolve(rd, get("paths.splits_dir", std::string("splits")));
  c.paths.checkpoints_dir = resolve(rd, get("paths.checkpoints_dir", std::string("checkpoints")));
  c.paths.reports_dir = resolve(rd, get("paths.reports_dir", std::string("reports")));

  for (const auto& [section, masked] : {std::pair{"ood", false}, std::pair{"ood_template", true}}) {
    if (const auto node = tree.get_child_optional(section)) {
      for (const auto& [name, v] : *node) c.ood.push_back({name, resolve(base, v.data()), masked});
    }
  }

  c.meme_k = get("preprocess.meme_k", c.meme_k);

  c.split.random_test_frac = get("split.random_test_frac", c.split.random_test_frac);
  c.split.user_test_frac = get("split.user_test_frac", c.split.user_test_frac);
  c.split.temporal_test_frac = get("split.temporal_test_frac", c.split.temporal_test_frac);
  c.split.dev_frac = get("split.dev_frac", c.split.dev_frac);
  c.split.seed = get("split.seed", c.seed);

  c.masking.p_emotion = get("masking.p_emotion", c.masking.p_emotion);
  c.masking.p_other = get("masking.p_other", c.masking.p_other);
  c.masking.seed = get("masking.seed", derive_seed(c.seed, 1));

  auto& e = c.encoder;
  e.layers = get("encoder.layers", e.layers);
  e.hidden = get("encoder.hidden", e.hidden);
  e.heads = get("encoder.heads", e.heads);
  e.ff = get("encoder.ff", e.ff);
  e.vocab = get("encoder.vocab", e.vocab);
  e.max_len = get("encoder.max_len", e.max_len);
  e.emb_dropout = get("encoder.emb_dropout", e.emb_dropout);

  auto& t = c.train;
  t.seed = get("train.seed", c.seed);
  t.log_every = get("train.log_every", t.log_every);
  t.pretrain.lr = get("pretrain.lr", t.pretrain.lr);
  t.pretrain.batch = get("pretrain.batch", t.pretrain.batch);
  t.pretrain.steps = get("pretrain.steps", t.pretrain.steps);
  t.pretrain.weight_decay = get("pretrain.weight_decay", t.pretrain.weight_decay);
  c.emlm_steps = get("pretrain.emlm_steps", t.pretrain.steps);
  t.probe.lr = get("probe.lr", t.probe.lr);
  t.probe.steps = get("probe.steps", t.probe.steps);
  t.probe.batch = get("probe.batch", t.probe.batch);
  t.finetune.lr = get("finetune.lr", t.finetune.lr);
  t.finetune.weight_decay = get("finetune.weight_decay", t.finetune.weight_decay);
  t.finetune.label_smoothing = get("finetune.label_smoothing", t.finetune.label_smoothing);
  t.finetune.epochs = get("finetune.epochs", t.finetune.epochs);
  t.finetune.effective_batch = get("finetune.effective_batch", t.finetune.effective_batch);
  t.finetune.micro_batch = get("finetune.micro_batch", t.finetune.micro_batch);
  t.contrastive.weight = get("contrastive.weight", t.contrastive.weight);
  t.contrastive.temperature = get("contrastive.temperature", t.contrastive.temperature);
  t.optimizer.max_grad_norm = get("optimizer.max_grad_norm", t.optimizer.max_grad_norm);

  c.eval.bootstrap = get("evaluation.bootstrap", c.eval.bootstrap);
  c.eval.seed = get("evaluation.seed", c.seed);
  c.eval.errors_per_label = get("evaluation.errors_per_label", c.eval.errors_per_label);

  c.nbsvm.vocab_size = get("nbsvm.vocab_size", c.nbsvm.vocab_size);
  c.nbsvm.beta = get("nbsvm.beta", c.nbsvm.beta);
  c.nbsvm.alpha = get("nbsvm.alpha", c.nbsvm.alpha);
  c.nbsvm.C = get("nbsvm.C", c.nbsvm.C);
  c.nbsvm.seed = get("nbsvm.seed", c.seed);
  return c;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  auto need = [&](const std::string& what, const std::string& p, bool optional) {
    if (p.empty()) {
      if (!optional) problems.push_back(what + " path is not set");
    } else if (!fs::is_regular_file(p)) {
      problems.push_back(what + " not found: " + p);
    }
  };
  need("corpus", paths.corpus, false);
  need("lexicon", paths.lexicon, false);
  need("category map", paths.cmap, true);
  need("tag mapping", paths.tags, true);
  for (const auto& o : ood) need("OOD set '" + o.name + "'", o.path, false);
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.emplace_back(e.what());
    }
  };
  check([&] { split.validate(); });
  check([&] { masking.validate(); });
  check([&] { encoder.validate(); });
  check([&] { train.validate(); });
  if (eval.bootstrap == 0) problems.emplace_back("evaluation.bootstrap must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(msg);
  }
}

json ExperimentConfig::to_json() const {
  json o = json::array();
  for (const auto& s : ood) o.push_back({{"name", s.name}, {"path", s.path}, {"mask_template", s.mask_template}});
  return json{{"paths", {{"corpus", paths.corpus}, {"lexicon", paths.lexicon}, {"cmap", paths.cmap}, {"tags", paths.tags}}},
              {"ood", o},
              {"meme_k", meme_k},
              {"split", {{"random_test_frac", split.random_test_frac}, {"user_test_frac", split.user_test_frac},
                         {"temporal_test_frac", split.temporal_test_frac}, {"dev_frac", split.dev_frac},
                         {"seed", split.seed}}},
              {"masking", {{"p_emotion", masking.p_emotion}, {"p_other", masking.p_other}, {"seed", masking.seed}}},
              {"encoder", encoder.to_json()},
              {"train", train.to_json()},
              {"emlm_steps", emlm_steps},
              {"eval", {{"bootstrap", eval.bootstrap}, {"seed", eval.seed}, {"errors_per_label", eval.errors_per_label}}},
              {"nbsvm", {{"vocab_size", nbsvm.vocab_size}, {"beta", nbsvm.beta}, {"alpha", nbsvm.alpha},
                         {"C", nbsvm.C}, {"seed", nbsvm.seed}}},
              {"seed", seed}};
}

std::string ExperimentConfig::hash() const { return hash_of(to_json()); }

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (opts.stop_after) {
    const auto& names = stage_names();
    if (std::find(names.begin(), names.end(), *opts.stop_after) == names.end())
      throw Error("unknown stage '" + *opts.stop_after + "'");
  }

  RunSummary summary;
  summary.run_dir = cfg.paths.run_dir;
  fs::create_directories(cfg.paths.run_dir);
  const std::string log_path = (fs::path(cfg.paths.run_dir) / "run.log").string();
  RunLogger logger(log_path);
  const json cj = cfg.to_json();
  const std::string config_hash = cfg.hash();
  jsonl::write_json((fs::path(cfg.paths.run_dir) / "config.json").string(), cj);
  StageRunner runner(opts, summary, config_hash, log_path);
  spdlog::info("run {} (config {}, code {})", cfg.paths.run_dir, config_hash.substr(0, 12), code_version());

  const std::string ck_dir = cfg.paths.checkpoints_dir;
  auto ck_path = [&](const std::string& name) { return (fs::path(ck_dir) / name).string(); };
  const std::string pre_dir = (fs::path(cfg.paths.run_dir) / "preprocess").string();
  const std::string clean_path = (fs::path(pre_dir) / "clean.jsonl").string();
  const std::string lex_sha = file_sha(cfg.paths.lexicon);

  auto stamp = [&](model::ModelCheckpoint& ck, const std::string& hash) { ck.provenance.config_hash = hash; };

  // preprocess
  const std::string h_pre = hash_of({{"corpus", file_sha(cfg.paths.corpus)},
                                     {"tags", cfg.paths.tags.empty() ? "" : file_sha(cfg.paths.tags)},
                                     {"meme_k", cfg.meme_k}});
  runner.run("preprocess", pre_dir, h_pre, [&] {
    const auto mapping = cfg.paths.tags.empty() ? corpus::TagMapping() : corpus::TagMapping::from_json_file(cfg.paths.tags);
    corpus::PipelineConfig pc;
    pc.meme_k = cfg.meme_k;
    const auto r = corpus::run_pipeline_file(cfg.paths.corpus, mapping, corpus::builtin_detectors(), pc);
    corpus::write_clean_jsonl(clean_path, r.posts);
    jsonl::write_text((fs::path(pre_dir) / "stats.json").string(), corpus::stats_json(r.stats));
    spdlog::info("preprocess kept {} of {} posts", r.stats.kept, r.stats.input);
  });

  // split
  const std::string h_split = hash_of({{"parent", h_pre}, {"split", cj["split"]}});
  runner.run("split", cfg.paths.splits_dir, h_split, [&] {
    const auto posts = corpus::read_clean_jsonl(clean_path);
    const auto result = splits::build_splits(posts, cfg.split);
    splits::write_splits(cfg.paths.splits_dir, posts, result);
  });

  auto train_posts = [&] { return read_split(cfg.paths.splits_dir, splits::Split::Train); };
  auto texts_of = [](const std::vector<corpus::CleanPost>& posts) {
    std::vector<std::string> t;
    for (const auto& p : posts) t.push_back(p.text);
    return t;
  };

  // pre-training: plain MLM base, then eMLM continued from it
  const std::string h_pre_base =
      hash_of({{"parent", h_split}, {"encoder", cj["encoder"]}, {"train", cfg.train.stage_json("pretrain")}, {"p_other", cfg.masking.p_other},
               {"masking_seed", cfg.masking.seed}});
  runner.run("pretrain_base", ck_path("pretrain_base"), h_pre_base, [&] {
    const auto texts = texts_of(train_posts());
    auto masking = emlm::MaskingConfig::uniform(cfg.masking.p_other);
    masking.seed = cfg.masking.seed;
    model::TrainLog log;
    auto ck = model::pretrain_mlm(texts, cfg.encoder, cfg.train, masking, {}, nullptr, &log);
    stamp(ck, h_pre_base);
    model::save_checkpoint(ck_path("pretrain_base"), ck);
    write_log(ck_path("pretrain_base") + "/train_log.jsonl", log);
  });

  const std::string h_pre_emlm =
      hash_of({{"parent", h_pre_base}, {"masking", cj["masking"]}, {"lexicon", lex_sha}, {"emlm_steps", cfg.emlm_steps}});
  runner.run("pretrain_emlm", ck_path("pretrain_emlm"), h_pre_emlm, [&] {
    const auto texts = texts_of(train_posts());
    const auto lex = lexicon::load_lexicon(cfg.paths.lexicon);
    const auto base = model::load_checkpoint(ck_path("pretrain_base"));
    auto tc = cfg.train;
    tc.pretrain.steps = cfg.emlm_steps;
    tc.seed = derive_seed(cfg.train.seed, 2);
    model::TrainLog log;
    auto ck = model::pretrain_mlm(texts, cfg.encoder, tc, cfg.masking, lexicon::emotion_word_set(lex), &base, &log);
    stamp(ck, h_pre_emlm);
    model::save_checkpoint(ck_path("pretrain_emlm"), ck);
    write_log(ck_path("pretrain_emlm") + "/train_log.jsonl", log);
  });

  std::map<std::string, std::string> h_probe, h_tune;
  for (const std::string branch : {"base", "emlm"}) {
    const std::string parent = branch == "base" ? h_pre_base : h_pre_emlm;
    h_probe[branch] = hash_of({{"parent", parent}, {"train", cfg.train.stage_json("probe")}});
    runner.run("probe_" + branch, ck_path("probe_" + branch), h_probe[branch], [&] {
      const auto base = model::load_checkpoint(ck_path("pretrain_" + branch));
      model::TrainLog log;
      auto ck = model::linear_probe(base, labeled(train_posts()), cfg.train, &log);
      stamp(ck, h_probe[branch]);
      model::save_checkpoint(ck_path("probe_" + branch), ck);
      write_log(ck_path("probe_" + branch) + "/train_log.jsonl", log);
    });
  }
  for (const std::string branch : {"base", "emlm"}) {
    h_tune[branch] = hash_of({{"parent", h_probe[branch]}, {"train", cfg.train.stage_json("finetune")}});
    runner.run("finetune_" + branch, ck_path("finetune_" + branch), h_tune[branch], [&] {
      const auto probed = model::load_checkpoint(ck_path("probe_" + branch));
      const auto dev = labeled(read_split(cfg.paths.splits_dir, splits::Split::Dev));
      model::TrainLog log;
      auto ck = model::fine_tune(probed, labeled(train_posts()), &dev, cfg.train, &log);
      stamp(ck, h_tune[branch]);
      model::save_checkpoint(ck_path("finetune_" + branch), ck);
      write_log(ck_path("finetune_" + branch) + "/train_log.jsonl", log);
    });
  }

  const std::string h_soup = hash_of({{"a", h_tune["base"]}, {"b", h_tune["emlm"]}});
  runner.run("soup", ck_path("soup"), h_soup, [&] {
    auto ck = model::average_weights(model::load_checkpoint(ck_path("finetune_base")),
                                     model::load_checkpoint(ck_path("finetune_emlm")));
    stamp(ck, h_soup);
    model::save_checkpoint(ck_path("soup"), ck);
  });

  json ood_hashes = json::object();
  for (const auto& o : cfg.ood) ood_hashes[o.name] = {file_sha(o.path), o.mask_template};
  const std::string h_eval = hash_of({{"soup", h_soup},
                                      {"eval", cj["eval"]},
                                      {"nbsvm", cj["nbsvm"]},
                                      {"ood", ood_hashes},
                                      {"lexicon", lex_sha},
                                      {"cmap", cfg.paths.cmap.empty() ? "" : file_sha(cfg.paths.cmap)}});
  runner.run("evaluate", cfg.paths.reports_dir, h_eval, [&] {
    const fs::path rep(cfg.paths.reports_dir);
    fs::create_directories(rep / "predictions");
    const auto lex = lexicon::load_lexicon(cfg.paths.lexicon);
    const auto cmap =
        cfg.paths.cmap.empty() ? lexicon::CategoryMap::defaults() : lexicon::CategoryMap::from_json_file(cfg.paths.cmap);
    const auto train = labeled(train_posts());
    const auto dev = labeled(read_split(cfg.paths.splits_dir, splits::Split::Dev));

    const std::vector<std::pair<std::string, std::string>> neural{
        {"base", "finetune_base"}, {"base+eMLM", "finetune_emlm"}, {"soup", "soup"}};
    std::vector<std::pair<std::string, model::Classifier>> classifiers;
    for (const auto& [name, dir] : neural) classifiers.emplace_back(name, model::Classifier(model::load_checkpoint(ck_path(dir))));
    const auto nb = baselines::nbsvm_train(train.texts, train.labels, cfg.nbsvm);
    baselines::save_nbsvm(ck_path("nbsvm"), nb);
    std::array<std::size_t, kNumLabels> counts{};
    for (auto l : train.labels) ++counts[index_of(l)];
    const EmotionLabel majority = kAllLabels[static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin())];

    // Every model's label for every text.
    auto predict_all = [&](const std::vector<std::string>& texts) {
      std::vector<std::pair<std::string, std::vector<EmotionLabel>>> out;
      for (const auto& [name, clf] : classifiers) {
        std::vector<EmotionLabel> labels;
        for (const auto& p : clf.predict(texts)) labels.push_back(p.label);
        out.emplace_back(name, std::move(labels));
      }
      std::vector<EmotionLabel> nbp;
      for (const auto& t : texts) nbp.push_back(baselines::nbsvm_predict(nb, t));
      out.emplace_back("nbsvm", std::move(nbp));
      out.emplace_back("majority", std::vector<EmotionLabel>(texts.size(), majority));
      return out;
    };
    auto dump = [&](const std::string& model, const std::string& dataset, const std::vector<std::string>& ids,
                    const std::vector<std::string>& texts, std::span<const EmotionLabel> golds,
                    std::span<const EmotionLabel> preds) {
      std::vector<eval::LabeledPrediction> rows;
      for (std::size_t i = 0; i < texts.size(); ++i) rows.push_back({ids[i], golds[i], preds[i], dataset, texts[i]});
      eval::write_predictions_jsonl((rep / "predictions" / (model + "__" + dataset + ".jsonl")).string(), rows);
      return rows;
    };

    std::vector<eval::EvalReport> in_domain, ood;
    std::map<std::string, std::map<std::string, double>> rank_scores;
    std::vector<eval::LabeledPrediction> soup_random;
    std::string dict_csv = "dataset,label,f1\n";
    std::uint64_t eval_stream = 0;
    for (auto s : {splits::Split::UserTest, splits::Split::TemporalTest, splits::Split::RandomTest}) {
      const std::string ds(splits::split_name(s));
      const auto posts = read_split(cfg.paths.splits_dir, s);
      std::vector<std::string> ids, texts;
      std::vector<EmotionLabel> golds;
      for (const auto& p : posts) {
        ids.push_back(p.id);
        texts.push_back(p.text);
        golds.push_back(p.label);
      }
      for (const auto& [model, preds] : predict_all(texts)) {
        auto rows = dump(model, ds, ids, texts, golds, preds);
        if (model == "soup" && s == splits::Split::RandomTest) soup_random = std::move(rows);
        in_domain.push_back(eval::evaluate(ds, model, golds, preds, kAllLabels, cfg.eval.bootstrap,
                                           derive_seed(cfg.eval.seed, eval_stream++)));
        rank_scores[model][ds] = in_domain.back().scores.point.macro;
      }
      const auto dict = baselines::fit_base_frequencies(dev.texts, lex, cmap);
      for (const auto& [l, f1] : baselines::dict_one_vs_rest_f1(texts, golds, dict, lex))
        dict_csv += ds + "," + std::string(label_name(l)) + "," + fmt::format("{:.2f}", f1) + "\n";
      if (s == splits::Split::UserTest) jsonl::write_json(ck_path("dictionary.json"), dict.to_json());
    }

    json ood_notes = json::object();
    for (const auto& o : cfg.ood) {
      std::vector<std::string> ids, texts;
      std::vector<EmotionLabel> golds;
      std::size_t excluded = 0, unmatched = 0, line = 0;
      for (const auto& j : jsonl::read_all(o.path)) {
        ++line;
        const auto gold = eval::map_ood_labels(j.at("label").get<std::string>());
        if (!gold) {
          ++excluded;
          continue;
        }
        std::string text = j.at("text").get<std::string>();
        if (o.mask_template) {
          auto prepared = eval::prepare_enisear(text, &lex);
          unmatched += prepared.matched ? 0 : 1;
          text = std::move(prepared.text);
        }
        ids.push_back(j.value("id", o.name + "-" + std::to_string(line)));
        texts.push_back(std::move(text));
        golds.push_back(*gold);
      }
      ood_notes[o.name] = {{"n", texts.size()}, {"excluded", excluded}, {"template_unmatched", unmatched}};
      if (texts.empty()) continue;
      for (auto [model, preds] : predict_all(texts)) {
        for (auto& p : preds) p = eval::map_ood_labels(label_name(p)).value();
        dump(model, o.name, ids, texts, golds, preds);
        ood.push_back(eval::evaluate(o.name, model, golds, preds, kOodLabels, cfg.eval.bootstrap,
                                     derive_seed(cfg.eval.seed, eval_stream++)));
      }
    }

    const auto ranks = eval::average_rank(rank_scores);
    json all = json::array();
    for (const auto& r : in_domain) all.push_back(eval::report_json(r));
    for (const auto& r : ood) all.push_back(eval::report_json(r));
    jsonl::write_json((rep / "reports.json").string(), all);
    jsonl::write_text((rep / "in_domain.csv").string(), eval::macro_table_csv(in_domain));
    jsonl::write_text((rep / "in_domain.md").string(), eval::macro_table_markdown(in_domain));
    jsonl::write_text((rep / "ood.csv").string(), eval::macro_table_csv(ood));
    jsonl::write_text((rep / "ood.md").string(), eval::macro_table_markdown(ood));
    std::vector<eval::EvalReport> every(in_domain);
    every.insert(every.end(), ood.begin(), ood.end());
    jsonl::write_text((rep / "per_class.csv").string(), eval::per_class_csv(every));
    jsonl::write_text((rep / "rank.md").string(), eval::rank_table_markdown(rank_scores, ranks));
    jsonl::write_json((rep / "rank.json").string(), ranks);
    jsonl::write_text((rep / "dictionary.csv").string(), dict_csv);
    eval::write_predictions_jsonl((rep / "errors.jsonl").string(),
                                  eval::sample_errors(soup_random, cfg.eval.errors_per_label, cfg.eval.seed));

    json stages = json::array();
    for (const auto& st : summary.stages) stages.push_back({{"stage", st.name}, {"hash", st.hash}});
    jsonl::write_json((rep / "manifest.json").string(), json{{"config_hash", config_hash},
                                                             {"code_version", std::string(code_version())},
                                                             {"stages", stages},
                                                             {"ood", ood_notes},
                                                             {"majority_label", label_name(majority)}});
  });

  json rs = json::array();
  for (const auto& st : summary.stages) rs.push_back({{"stage", st.name}, {"hash", st.hash}, {"cached", st.cached}});
  jsonl::write_json((fs::path(cfg.paths.run_dir) / "run_summary.json").string(),
                    json{{"config_hash", config_hash}, {"code_version", std::string(code_version())}, {"stages", rs}});
  return summary;
}

}  // namespace emoid::experiment
