#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scogait/dataset.hpp"
#include "scogait/explain.hpp"
#include "scogait/keyvalue.hpp"
#include "scogait/model.hpp"
#include "scogait/synthgait.hpp"
#include "scogait/train_eval.hpp"

namespace scogait {

struct DataConfig {
  std::filesystem::path root;       // dataset root (layout or manifest.jsonl)
  std::filesystem::path test_root;  // optional separate test set; disables the split
};

struct CamConfig {
  std::string sequence;              // "subject/sequence"; empty: first test sequence
  std::string target = "predicted";  // positive|neutral|negative|predicted
  OverlayOptions overlay;
};

// Everything a command needs. run.seed feeds the split, batch sampling,
// initialization and evaluation sampling.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
  DataConfig data;
  SplitSpec split;
  SynthSpec synth;
  RatioStudyConfig study;
  CamConfig cam;
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs";
  std::string tag;  // empty: timestamp
  std::filesystem::path checkpoint;

  RunConfig();
  // Pushes `seed` into the per-module configs.
  void propagate_seed();
};

// Unknown keys and every invalid value are reported together as ConfigError.
RunConfig run_config_from(const KeyValues& kv);
KeyValues to_keyvalues(const RunConfig& config);

// Defaults, then the file (if any), then the overrides.
RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides);

}  // namespace scogait
