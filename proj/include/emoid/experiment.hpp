#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emoid/baselines.hpp"
#include "emoid/emlm.hpp"
#include "emoid/encoder.hpp"
#include "emoid/splits.hpp"
#include "emoid/trainer.hpp"

namespace emoid::experiment {

struct OodSet {
  std::string name;
  std::string path;            // JSONL with `text` and `label`
  bool mask_template = false;  // "I felt ... when/because ..." sentences
};

struct ExperimentConfig {
  struct Paths {
    std::string corpus;   // raw posts, JSONL
    std::string lexicon;  // word<TAB>category<TAB>flag
    std::string cmap;     // optional; default category map when empty
    std::string tags;     // optional; default tag mapping when empty
    std::string run_dir;
    std::string splits_dir;
    std::string checkpoints_dir;
    std::string reports_dir;
  } paths;
  std::vector<OodSet> ood;
  std::size_t meme_k = 10;
  splits::SplitSpec split;
  emlm::MaskingConfig masking;
  model::EncoderConfig encoder;
  model::TrainConfig train;
  std::size_t emlm_steps = 5000;  // continued pre-training of the eMLM branch
  struct Eval {
    std::size_t bootstrap = 10000;
    std::uint64_t seed = 0;
    std::size_t errors_per_label = 10;
  } eval;
  baselines::NbsvmConfig nbsvm;
  std::uint64_t seed = 1234;

  /// Reads an INI file. Relative input paths resolve against the file's
  /// directory; the run directory resolves against $EMOID_RUN_ROOT when set.
  static ExperimentConfig load(const std::string& ini_path);

  /// Throws listing every missing input or invalid setting.
  void validate() const;
  nlohmann::json to_json() const;
  std::string hash() const;
};

struct RunOptions {
  std::optional<std::string> stop_after;  // stage name
  bool force = false;
};

struct StageRecord {
  std::string name;
  std::string hash;
  bool cached = false;
};

struct RunSummary {
  std::string run_dir;
  std::vector<StageRecord> stages;
};

const std::vector<std::string>& stage_names();

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

}  // namespace emoid::experiment
