#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scogait/dataset.hpp"
#include "scogait/losses.hpp"
#include "scogait/model.hpp"

namespace scogait {

struct TrainConfig {
  double lr0 = 0.1;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  double gamma = 0.1;
  std::vector<int> milestones{10000, 14000, 18000};
  int total_iters = 20000;
  int P = 8;
  int K = 2;
  int frames = 30;
  std::uint64_t seed = 0;
  TripletOptions triplet;
  int log_interval = 100;  // console progress; the JSONL log gets every iteration

  void validate() const;
};

double lr_at(int iter, const TrainConfig& cfg);

struct IterationRecord {
  int iter = 0;
  double lr = 0.0;
  LossReport loss;
};

struct TrainResult {
  ScoNet<float> model;
  std::vector<IterationRecord> log;
  std::filesystem::path checkpoint;  // final checkpoint
};

// Writes train_log.jsonl, model_iter_XXXXXX.ckpt at each milestone and
// model_final.ckpt under out_dir.
TrainResult train(const Manifest& train_set, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  FrameStore& store);

// 0 evaluates every frame of a sequence; n > 0 samples n frames.
struct EvalOptions {
  int frames = 0;
  std::uint64_t seed = 0;
  int sequences_per_pass = 8;
};

// Argmax with ties going to the lower class index (positive first).
DiagnosticLabel severity_argmax(std::span<const float> logits);

std::vector<float> sequence_logits(ScoNet<float>& model, const SequenceRecord& record,
                                   FrameStore& store, const EvalOptions& options = {});
DiagnosticLabel predict(ScoNet<float>& model, const SequenceRecord& record, FrameStore& store,
                        const EvalOptions& options = {});

struct ConfusionMatrix {
  std::array<std::array<long, kNumClasses>, kNumClasses> counts{};  // [true][predicted]

  void add(DiagnosticLabel truth, DiagnosticLabel predicted) {
    ++counts[index_of(truth)][index_of(predicted)];
  }
  long row_sum(DiagnosticLabel l) const;
  long total() const;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;  // undefined without positive cases
  std::optional<double> specificity;  // undefined without negative cases
};

EvalReport compute_metrics(const ConfusionMatrix& cm);

struct SequencePrediction {
  std::string key;
  std::string subject_id;
  DiagnosticLabel truth;
  DiagnosticLabel predicted;
  std::vector<float> logits;
};

struct EvalOutcome {
  EvalReport report;          // sequence level
  EvalReport subject_report;  // majority vote per subject
  std::vector<SequencePrediction> predictions;
};

using Predictor = std::function<DiagnosticLabel(const SequenceRecord&)>;

EvalOutcome evaluate(const Predictor& predictor, const Manifest& test_set);
EvalOutcome evaluate(ScoNet<float>& model, const Manifest& test_set, FrameStore& store,
                     const EvalOptions& options = {});

std::string report_json(const EvalOutcome& outcome);
std::string confusion_csv(const ConfusionMatrix& cm);
// eval_report.json, confusion.csv, predictions.csv
void write_eval_outputs(const EvalOutcome& outcome, const std::filesystem::path& dir);

struct RatioRun {
  ClassRatio ratio;
  Variant variant;
  std::uint64_t seed;
  ClassCounts train_counts;
  EvalReport report;
};

struct RatioStudyConfig {
  std::vector<ClassRatio> ratios;
  std::vector<Variant> variants{Variant::kSconet, Variant::kSconetMt};
  std::vector<std::uint64_t> seeds{0};
  int ratio_total = 0;  // 0: whatever the pool allows
};

// For each ratio: subsample the pool, then train and evaluate every variant
// for every seed. Writes ratio_study.csv plus per-run directories.
std::vector<RatioRun> ratio_study(const Manifest& train_pool, const Manifest& test_set,
                                  const RatioStudyConfig& study, const ModelConfig& model_cfg,
                                  const TrainConfig& train_cfg,
                                  const std::filesystem::path& out_dir, FrameStore& store,
                                  const EvalOptions& eval = {});

// Mean accuracy per (ratio, variant) over seeds, as a CSV table.
std::string ratio_table(const std::vector<RatioRun>& runs);

}  // namespace scogait
