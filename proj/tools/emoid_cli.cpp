// Command-line front end: one subcommand per pipeline operation plus `run`.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "emoid/attribution.hpp"
#include "emoid/baselines.hpp"
#include "emoid/checkpoint.hpp"
#include "emoid/corpus.hpp"
#include "emoid/evaluation.hpp"
#include "emoid/experiment.hpp"
#include "emoid/fixture.hpp"
#include "emoid/jsonl.hpp"
#include "emoid/lexicon.hpp"
#include "emoid/splits.hpp"
#include "emoid/trainer.hpp"

namespace fs = std::filesystem;
using namespace emoid;
using jsonl::Json;

namespace {

EmotionLabel label_or_throw(const std::string& s) {
  const auto l = parse_label(s);
  if (!l) throw Error("unknown label '" + s + "'");
  return *l;
}

model::LabeledData load_labeled(const std::string& path) {
  model::LabeledData d;
  for (const auto& p : corpus::read_clean_jsonl(path)) {
    d.texts.push_back(p.text);
    d.labels.push_back(p.label);
  }
  return d;
}

std::vector<std::string> load_texts(const std::string& path) {
  std::vector<std::string> out;
  for (const auto& j : jsonl::read_all(path)) out.push_back(j.at("text").get<std::string>());
  return out;
}

void add_train_flags(CLI::App* app, model::TrainConfig& t) {
  app->add_option("--seed", t.seed);
  app->add_option("--log-every", t.log_every);
  app->add_option("--pretrain-lr", t.pretrain.lr);
  app->add_option("--pretrain-batch", t.pretrain.batch);
  app->add_option("--pretrain-steps", t.pretrain.steps);
  app->add_option("--pretrain-weight-decay", t.pretrain.weight_decay);
  app->add_option("--probe-lr", t.probe.lr);
  app->add_option("--probe-steps", t.probe.steps);
  app->add_option("--probe-batch", t.probe.batch);
  app->add_option("--finetune-lr", t.finetune.lr);
  app->add_option("--weight-decay", t.finetune.weight_decay);
  app->add_option("--label-smoothing", t.finetune.label_smoothing);
  app->add_option("--epochs", t.finetune.epochs);
  app->add_option("--effective-batch", t.finetune.effective_batch);
  app->add_option("--micro-batch", t.finetune.micro_batch);
  app->add_option("--contrastive-weight", t.contrastive.weight);
  app->add_option("--temperature", t.contrastive.temperature);
  app->add_option("--max-grad-norm", t.optimizer.max_grad_norm);
}

void add_encoder_flags(CLI::App* app, model::EncoderConfig& e) {
  app->add_option("--layers", e.layers);
  app->add_option("--hidden", e.hidden);
  app->add_option("--heads", e.heads);
  app->add_option("--ff", e.ff);
  app->add_option("--vocab", e.vocab);
  app->add_option("--max-len", e.max_len);
  app->add_option("--emb-dropout", e.emb_dropout);
}

void write_report(const std::string& dir, const std::vector<eval::EvalReport>& reports) {
  fs::create_directories(dir);
  Json all = Json::array();
  for (const auto& r : reports) all.push_back(eval::report_json(r));
  jsonl::write_json(dir + "/report.json", all);
  jsonl::write_text(dir + "/macro_f1.csv", eval::macro_table_csv(reports));
  jsonl::write_text(dir + "/macro_f1.md", eval::macro_table_markdown(reports));
  jsonl::write_text(dir + "/per_class.csv", eval::per_class_csv(reports));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emotion identification pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(code_version()));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings");

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "clean raw posts");
  std::string pre_in, pre_out, pre_tags, pre_stats;
  std::size_t meme_k = 10;
  pre->add_option("--in", pre_in)->required();
  pre->add_option("--out", pre_out)->required();
  pre->add_option("--mapping,--tags", pre_tags, "tag -> label JSON");
  pre->add_option("--stats", pre_stats);
  pre->add_option("--meme-k", meme_k);

  // split
  auto* spl = app.add_subcommand("split", "build train/dev/test splits");
  std::string spl_in, spl_out, spl_spec;
  splits::SplitSpec spec;
  spl->add_option("--in", spl_in)->required();
  spl->add_option("--out-dir,--out", spl_out)->required();
  spl->add_option("--spec", spl_spec, "SplitSpec JSON");
  spl->add_option("--seed", spec.seed);
  spl->add_option("--random-test-frac", spec.random_test_frac);
  spl->add_option("--user-test-frac", spec.user_test_frac);
  spl->add_option("--temporal-test-frac", spec.temporal_test_frac);
  spl->add_option("--dev-frac", spec.dev_frac);

  // pretrain
  auto* ptr = app.add_subcommand("pretrain", "masked-LM pre-training");
  std::string ptr_corpus, ptr_out, ptr_init, ptr_lex;
  model::TrainConfig tcfg;
  model::EncoderConfig ecfg;
  emlm::MaskingConfig mcfg;
  ptr->add_option("--corpus", ptr_corpus, "clean posts JSONL")->required();
  ptr->add_option("--out", ptr_out)->required();
  ptr->add_option("--init", ptr_init, "continue from this checkpoint");
  ptr->add_option("--lexicon", ptr_lex, "emotion lexicon; enables eMLM masking");
  ptr->add_option("--p-emotion", mcfg.p_emotion);
  ptr->add_option("--p-other", mcfg.p_other);
  ptr->add_option("--mask-seed", mcfg.seed);
  add_train_flags(ptr, tcfg);
  add_encoder_flags(ptr, ecfg);

  // probe / finetune
  auto* prb = app.add_subcommand("probe", "train a classifier head on frozen features");
  std::string ck_in, ck_out, train_path, dev_path;
  prb->add_option("--ckpt", ck_in)->required();
  prb->add_option("--train", train_path)->required();
  prb->add_option("--out", ck_out)->required();
  add_train_flags(prb, tcfg);
  auto* ft = app.add_subcommand("finetune", "full fine-tuning with the joint loss");
  ft->add_option("--ckpt", ck_in)->required();
  ft->add_option("--train", train_path)->required();
  ft->add_option("--dev", dev_path);
  ft->add_option("--out", ck_out)->required();
  add_train_flags(ft, tcfg);

  // soup
  auto* soup = app.add_subcommand("soup", "average two checkpoints");
  std::string soup_a, soup_b;
  soup->add_option("--a", soup_a)->required();
  soup->add_option("--b", soup_b)->required();
  soup->add_option("--out", ck_out)->required();

  // predict
  auto* pred = app.add_subcommand("predict", "label texts with a checkpoint");
  std::string in_path, out_path;
  pred->add_option("--ckpt", ck_in)->required();
  pred->add_option("--in", in_path, "JSONL with `text` (and optional `id`)")->required();
  pred->add_option("--out", out_path)->required();

  // baselines
  auto* bdict = app.add_subcommand("baseline-dict", "lexicon dictionary baseline");
  std::string lex_path, cmap_path, test_path, report_dir;
  bdict->add_option("--dev", dev_path)->required();
  bdict->add_option("--test", test_path)->required();
  bdict->add_option("--lexicon", lex_path)->required();
  bdict->add_option("--cmap", cmap_path);
  bdict->add_option("--report", report_dir)->required();
  auto* bnb = app.add_subcommand("baseline-nbsvm", "NBSVM baseline");
  baselines::NbsvmConfig nbcfg;
  std::string nb_model;
  bnb->add_option("--train", train_path)->required();
  bnb->add_option("--test", test_path)->required();
  bnb->add_option("--report", report_dir)->required();
  bnb->add_option("--model-out", nb_model);
  bnb->add_option("--vocab-size", nbcfg.vocab_size);
  bnb->add_option("--beta", nbcfg.beta);
  bnb->add_option("--C", nbcfg.C);

  // evaluation
  auto* ev = app.add_subcommand("evaluate", "macro-F1 with bootstrap CIs");
  std::string gold_path, label_mode = "5class", dataset = "test", model_name = "model";
  std::size_t bootstrap = 10000;
  std::uint64_t seed = 0;
  ev->add_option("--pred", in_path, "JSONL with `id` and `label`")->required();
  ev->add_option("--gold", gold_path, "JSONL with `id` and `label`")->required();
  ev->add_option("--labels", label_mode)->check(CLI::IsMember({"5class", "4class"}));
  ev->add_option("--bootstrap", bootstrap);
  ev->add_option("--seed", seed);
  ev->add_option("--dataset", dataset);
  ev->add_option("--model", model_name);
  ev->add_option("--report", report_dir)->required();

  auto* rk = app.add_subcommand("rank", "average rank of models across datasets");
  std::string scores_path;
  rk->add_option("--scores", scores_path, "JSON {model: {dataset: score}}")->required();
  rk->add_option("--out", out_path);

  auto* se = app.add_subcommand("sample-errors", "sample misclassified predictions per gold label");
  std::size_t per_label = 10;
  se->add_option("--pred", in_path, "JSONL with `gold` and `pred`")->required();
  se->add_option("--per-label", per_label);
  se->add_option("--seed", seed);
  se->add_option("--out", out_path);

  auto* ex = app.add_subcommand("explain", "perturbation-based token attributions");
  std::string text, target;
  attribution::ExplainConfig xcfg;
  ex->add_option("--ckpt", ck_in)->required();
  ex->add_option("--text", text)->required();
  ex->add_option("--class", target)->required();
  ex->add_option("--samples", xcfg.n_samples);
  ex->add_option("--seed", xcfg.seed);
  ex->add_option("--out", out_path);

  auto* en = app.add_subcommand("prepare-enisear", "mask the emotion word of template sentences");
  en->add_option("--in", in_path, "JSONL with `text`")->required();
  en->add_option("--out", out_path)->required();
  en->add_option("--lexicon", lex_path);

  // orchestration
  auto* run = app.add_subcommand("run", "run the experiment pipeline from a config file");
  std::string config_path, stage;
  bool force = false;
  run->add_option("--config", config_path)->required();
  run->add_option("--stage", stage, "stop after this stage");
  run->add_flag("--force", force, "ignore cached stages");

  auto* syn = app.add_subcommand("synth-fixture", "write the synthetic corpus, lexicon and OOD sets");
  fixture::FixtureConfig fx;
  syn->add_option("--out", out_path)->required();
  syn->add_option("--posts", fx.posts);
  syn->add_option("--users", fx.users);
  syn->add_option("--seed", fx.seed);

  CLI11_PARSE(app, argc, argv);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*pre) {
      const auto mapping = pre_tags.empty() ? corpus::TagMapping() : corpus::TagMapping::from_json_file(pre_tags);
      corpus::PipelineConfig pc;
      pc.meme_k = meme_k;
      const auto r = corpus::run_pipeline_file(pre_in, mapping, corpus::builtin_detectors(), pc);
      corpus::write_clean_jsonl(pre_out, r.posts);
      if (!pre_stats.empty()) jsonl::write_text(pre_stats, corpus::stats_json(r.stats));
      std::cout << corpus::stats_json(r.stats) << '\n';
    } else if (*spl) {
      const auto s = spl_spec.empty() ? spec : splits::SplitSpec::from_json_file(spl_spec);
      const auto posts = corpus::read_clean_jsonl(spl_in);
      const auto result = splits::build_splits(posts, s);
      splits::write_splits(spl_out, posts, result);
      std::cout << splits::manifest_json(result.manifest) << '\n';
    } else if (*ptr) {
      std::vector<std::string> texts;
      for (const auto& p : corpus::read_clean_jsonl(ptr_corpus)) texts.push_back(p.text);
      std::set<std::string> words;
      if (!ptr_lex.empty()) {
        words = lexicon::emotion_word_set(lexicon::load_lexicon(ptr_lex));
      } else {
        const auto seed_keep = mcfg.seed;
        mcfg = emlm::MaskingConfig::uniform(mcfg.p_other);
        mcfg.seed = seed_keep;
      }
      std::optional<model::ModelCheckpoint> init;
      if (!ptr_init.empty()) init = model::load_checkpoint(ptr_init);
      const auto ck = model::pretrain_mlm(texts, ecfg, tcfg, mcfg, words, init ? &*init : nullptr);
      model::save_checkpoint(ptr_out, ck);
    } else if (*prb) {
      const auto ck = model::linear_probe(model::load_checkpoint(ck_in), load_labeled(train_path), tcfg);
      model::save_checkpoint(ck_out, ck);
    } else if (*ft) {
      std::optional<model::LabeledData> dev;
      if (!dev_path.empty()) dev = load_labeled(dev_path);
      const auto ck = model::fine_tune(model::load_checkpoint(ck_in), load_labeled(train_path), dev ? &*dev : nullptr, tcfg);
      model::save_checkpoint(ck_out, ck);
    } else if (*soup) {
      model::save_checkpoint(ck_out, model::average_weights(model::load_checkpoint(soup_a), model::load_checkpoint(soup_b)));
    } else if (*pred) {
      const model::Classifier clf(model::load_checkpoint(ck_in));
      const auto rows = jsonl::read_all(in_path);
      std::vector<std::string> texts;
      for (const auto& r : rows) texts.push_back(r.at("text").get<std::string>());
      const auto preds = clf.predict(texts);
      std::vector<Json> out;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        Json probs = Json::object();
        for (auto l : kAllLabels) probs[std::string(label_name(l))] = preds[i].probs[index_of(l)];
        out.push_back({{"id", rows[i].value("id", std::to_string(i))},
                       {"label", label_name(preds[i].label)},
                       {"probs", probs},
                       {"degenerate", preds[i].degenerate}});
      }
      jsonl::write_all(out_path, out);
    } else if (*bdict) {
      const auto lex = lexicon::load_lexicon(lex_path);
      const auto cmap = cmap_path.empty() ? lexicon::CategoryMap::defaults() : lexicon::CategoryMap::from_json_file(cmap_path);
      const auto dev = load_labeled(dev_path);
      const auto test = load_labeled(test_path);
      const auto model = baselines::fit_base_frequencies(dev.texts, lex, cmap);
      fs::create_directories(report_dir);
      jsonl::write_json(report_dir + "/dictionary_model.json", model.to_json());
      std::string csv = "label,f1\n";
      for (const auto& [l, f1] : baselines::dict_one_vs_rest_f1(test.texts, test.labels, model, lex))
        csv += std::string(label_name(l)) + "," + std::to_string(f1) + "\n";
      jsonl::write_text(report_dir + "/dictionary_f1.csv", csv);
      std::cout << csv;
    } else if (*bnb) {
      const auto train = load_labeled(train_path);
      const auto test = load_labeled(test_path);
      const auto model = baselines::nbsvm_train(train.texts, train.labels, nbcfg);
      if (!nb_model.empty()) baselines::save_nbsvm(nb_model, model);
      std::vector<EmotionLabel> preds;
      for (const auto& t : test.texts) preds.push_back(baselines::nbsvm_predict(model, t));
      const auto r = eval::evaluate("test", "nbsvm", test.labels, preds, kAllLabels, 10000, 0);
      write_report(report_dir, {r});
      std::cout << eval::macro_table_markdown(std::vector{r});
    } else if (*ev) {
      const bool four = label_mode == "4class";
      std::map<std::string, std::string> gold;
      for (const auto& j : jsonl::read_all(gold_path)) gold[j.at("id").get<std::string>()] = j.at("label").get<std::string>();
      std::vector<EmotionLabel> g, p;
      for (const auto& j : jsonl::read_all(in_path)) {
        const auto id = j.at("id").get<std::string>();
        const auto it = gold.find(id);
        if (it == gold.end()) throw Error("prediction for unknown id '" + id + "'");
        const auto pl = j.at("label").get<std::string>();
        if (four) {
          const auto gm = eval::map_ood_labels(it->second);
          if (!gm) continue;
          const auto pm = eval::map_ood_labels(pl);
          if (!pm) throw Error("prediction '" + pl + "' has no four-class equivalent");
          g.push_back(*gm);
          p.push_back(*pm);
        } else {
          g.push_back(label_or_throw(it->second));
          p.push_back(label_or_throw(pl));
        }
      }
      const std::vector<EmotionLabel> set = four ? std::vector<EmotionLabel>(kOodLabels.begin(), kOodLabels.end())
                                                 : std::vector<EmotionLabel>(kAllLabels.begin(), kAllLabels.end());
      const auto r = eval::evaluate(dataset, model_name, g, p, set, bootstrap, seed);
      write_report(report_dir, {r});
      std::cout << eval::macro_table_markdown(std::vector{r});
    } else if (*rk) {
      const auto j = jsonl::read_json(scores_path);
      std::map<std::string, std::map<std::string, double>> scores;
      for (const auto& [m, row] : j.items()) {
        for (const auto& [d, v] : row.items()) scores[m][d] = v.get<double>();
      }
      const auto ranks = eval::average_rank(scores);
      const auto md = eval::rank_table_markdown(scores, ranks);
      if (!out_path.empty()) jsonl::write_text(out_path, md);
      std::cout << md;
    } else if (*se) {
      const auto preds = eval::read_predictions_jsonl(in_path);
      const auto errs = eval::sample_errors(preds, per_label, seed);
      if (out_path.empty()) {
        for (const auto& e : errs)
          std::cout << e.id << '\t' << label_name(e.gold) << '\t' << label_name(e.pred) << '\t' << e.text << '\n';
      } else {
        eval::write_predictions_jsonl(out_path, errs);
      }
    } else if (*ex) {
      const model::Classifier clf(model::load_checkpoint(ck_in));
      const auto scorer = [&](std::span<const std::string> texts) {
        std::vector<std::optional<attribution::Probs>> out;
        for (const auto& p : clf.predict(texts)) out.emplace_back(p.probs);
        return out;
      };
      const auto e = attribution::explain(scorer, text, label_or_throw(target), xcfg);
      const auto j = e.to_json().dump(2);
      if (!out_path.empty()) jsonl::write_text(out_path, j + "\n");
      std::cout << j << '\n';
    } else if (*en) {
      std::optional<lexicon::EmotionLexicon> lex;
      if (!lex_path.empty()) lex = lexicon::load_lexicon(lex_path);
      std::vector<Json> rows;
      std::size_t unmatched = 0;
      for (auto j : jsonl::read_all(in_path)) {
        const auto r = eval::prepare_enisear(j.at("text").get<std::string>(), lex ? &*lex : nullptr);
        j["text"] = r.text;
        j["template_matched"] = r.matched;
        unmatched += r.matched ? 0 : 1;
        rows.push_back(std::move(j));
      }
      jsonl::write_all(out_path, rows);
      if (unmatched > 0) spdlog::warn("{} sentences did not match the template", unmatched);
    } else if (*run) {
      auto cfg = experiment::ExperimentConfig::load(config_path);
      experiment::RunOptions opts;
      if (!stage.empty()) opts.stop_after = stage;
      opts.force = force;
      const auto summary = experiment::run_experiment(cfg, opts);
      for (const auto& s : summary.stages)
        std::cout << s.name << '\t' << (s.cached ? "cached" : "ran") << '\t' << s.hash.substr(0, 12) << '\n';
      std::cout << "run directory: " << summary.run_dir << '\n';
    } else if (*syn) {
      fixture::write_fixture(out_path, fx);
      std::cout << "wrote fixture to " << out_path << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
