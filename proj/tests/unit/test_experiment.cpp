#include <doctest.h>

#include <filesystem>
#include <map>

#include "emoid/experiment.hpp"
#include "emoid/fixture.hpp"
#include "emoid/jsonl.hpp"
#include "support.hpp"

using namespace emoid;
using namespace emoid::experiment;
namespace fs = std::filesystem;

namespace {

// `finetune` lines go into the [finetune] section, `extra` is appended.
std::string tiny_ini(const std::string& extra = "", const std::string& finetune = "") {
  return "[run]\nseed = 7\n"
         "[paths]\ncorpus = data/raw.jsonl\nlexicon = data/lexicon.tsv\ncmap = data/cmap.json\nrun_dir = run\n"
         "[ood]\nsynth = data/ood.jsonl\n"
         "[ood_template]\nenisear = data/enisear.jsonl\n"
         "[encoder]\nlayers = 1\nhidden = 16\nheads = 2\nff = 32\nvocab = 300\nmax_len = 24\n"
         "[pretrain]\nlr = 2e-3\nbatch = 16\nsteps = 20\nemlm_steps = 10\n"
         "[probe]\nlr = 1e-2\nsteps = 20\n"
         "[finetune]\nepochs = 1\neffective_batch = 32\nmicro_batch = 16\n" +
         (finetune.empty() ? "lr = 1e-3\n" : finetune) +
         "[evaluation]\nbootstrap = 50\n" +
         extra;
}

// Every artifact under `dir`, keyed by relative path. The log and the
// summary (which records cache hits) differ between runs.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const auto leaf = e.path().filename();
    if (!e.is_regular_file() || leaf == "run.log" || leaf == "run_summary.json") continue;
    out[fs::relative(e.path(), dir).string()] = jsonl::read_text(e.path().string());
  }
  return out;
}

}  // namespace

TEST_CASE("config loading resolves paths and reads every section") {
  testing::ScratchDir dir("cfg");
  jsonl::write_text(dir / "run.ini", tiny_ini("[split]\ndev_frac = 0.2\n[contrastive]\nweight = 0.5\n"));
  const auto c = ExperimentConfig::load(dir / "run.ini");
  CHECK(c.paths.corpus == (fs::path(dir.str()) / "data/raw.jsonl").lexically_normal().string());
  CHECK(c.paths.reports_dir == (fs::path(c.paths.run_dir) / "reports").string());
  REQUIRE(c.ood.size() == 2);
  CHECK_FALSE(c.ood[0].mask_template);
  CHECK(c.ood[1].mask_template);
  CHECK(c.encoder.hidden == 16);
  CHECK(c.emlm_steps == 10);
  CHECK(c.split.dev_frac == 0.2);
  CHECK(c.train.contrastive.weight == 0.5);
  CHECK(c.train.seed == 7);
  CHECK(c.eval.bootstrap == 50);

  jsonl::write_text(dir / "other.ini", tiny_ini("", "lr = 1e-4\n"));
  CHECK(ExperimentConfig::load(dir / "other.ini").hash() != c.hash());
  jsonl::write_text(dir / "broken.ini", "[paths\ncorpus = x\n");
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "broken.ini"), Error);
}

TEST_CASE("validation lists missing inputs and writes nothing") {
  testing::ScratchDir dir("cfg-missing");
  fixture::FixtureConfig fc;
  fc.posts = 300;
  fixture::write_fixture(dir / "data", fc);
  fs::remove(dir / "data/lexicon.tsv");
  fs::remove(dir / "data/ood.jsonl");
  jsonl::write_text(dir / "run.ini", tiny_ini());
  const auto c = ExperimentConfig::load(dir / "run.ini");
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("lexicon not found"), Error);
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("OOD set 'synth' not found"), Error);
  CHECK_THROWS_AS(run_experiment(c), Error);
  CHECK_FALSE(fs::exists(c.paths.run_dir));
}

TEST_CASE("a tiny run produces every artifact, caches stages and reproduces bytes") {
  testing::ScratchDir dir("run");
  fixture::FixtureConfig fc;
  fc.posts = 1200;
  fc.users = 120;
  fixture::write_fixture(dir / "data", fc);
  jsonl::write_text(dir / "run.ini", tiny_ini());
  const auto c = ExperimentConfig::load(dir / "run.ini");

  RunOptions upto;
  upto.stop_after = "split";
  const auto partial = run_experiment(c, upto);
  CHECK(partial.stages.size() == 2);
  CHECK(fs::exists(fs::path(c.paths.splits_dir) / "manifest.json"));
  CHECK_FALSE(fs::exists(c.paths.checkpoints_dir));

  const auto first = run_experiment(c);
  REQUIRE(first.stages.size() == stage_names().size());
  CHECK(first.stages[0].cached);
  CHECK(first.stages[1].cached);
  for (std::size_t i = 2; i < first.stages.size(); ++i) CHECK_FALSE(first.stages[i].cached);

  const fs::path rep(c.paths.reports_dir);
  for (const char* f : {"reports.json", "in_domain.csv", "in_domain.md", "ood.csv", "ood.md", "per_class.csv",
                        "rank.md", "rank.json", "dictionary.csv", "errors.jsonl", "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::is_regular_file(rep / f));
  }
  const auto reports = jsonl::read_json((rep / "reports.json").string());
  // 3 in-domain splits and 2 OOD sets, 5 models each
  CHECK(reports.size() == 25);
  const auto before = snapshot(c.paths.run_dir);

  const auto again = run_experiment(c);
  for (const auto& s : again.stages) CHECK(s.cached);
  CHECK(snapshot(c.paths.run_dir) == before);

  RunOptions force;
  force.force = true;
  run_experiment(c, force);
  CHECK(snapshot(c.paths.run_dir) == before);

  // label smoothing is read by the probe and fine-tuning, not by pre-training
  jsonl::write_text(dir / "run.ini", tiny_ini("", "lr = 1e-3\nlabel_smoothing = 0.05\n"));
  const auto changed = run_experiment(ExperimentConfig::load(dir / "run.ini"));
  std::map<std::string, bool> cached;
  for (const auto& s : changed.stages) cached[s.name] = s.cached;
  CHECK(cached["pretrain_base"]);
  CHECK(cached["pretrain_emlm"]);
  CHECK_FALSE(cached["probe_base"]);
  CHECK_FALSE(cached["finetune_base"]);
  CHECK_FALSE(cached["evaluate"]);

  RunOptions bad;
  bad.stop_after = "nonsense";
  CHECK_THROWS_AS(run_experiment(c, bad), Error);
}
