#include "scogait/train_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "scogait/checkpoint.hpp"
#include "scogait/errors.hpp"
#include "scogait/optim.hpp"
#include "scogait/random.hpp"

namespace scogait {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Frame indices refer to the files of a record; frames that failed to load
// shift the mapping proportionally.
const NormalizedFrame& pick(const std::vector<NormalizedFrame>& loaded, int n_files, int index) {
  if (static_cast<int>(loaded.size()) == n_files) return loaded[index];
  const auto j = static_cast<std::size_t>(index) * loaded.size() / static_cast<std::size_t>(n_files);
  return loaded[std::min(j, loaded.size() - 1)];
}

void copy_frame(const BinaryMask& m, float* dst) {
  for (std::size_t i = 0; i < m.pixels.size(); ++i) dst[i] = m.pixels[i];
}

std::string milestone_name(long iter) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "model_iter_%06ld.ckpt", iter);
  return buf;
}

json metric(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_to_json(const EvalReport& r) {
  json cm = json::array();
  for (const auto& row : r.confusion.counts) cm.push_back(row);
  return {{"accuracy", metric(r.accuracy)},
          {"sensitivity", metric(r.sensitivity)},
          {"specificity", metric(r.specificity)},
          {"confusion", cm},
          {"labels", {"positive", "neutral", "negative"}},
          {"total", r.confusion.total()}};
}

DiagnosticLabel majority(const std::array<int, kNumClasses>& votes) {
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  return label_from_index(best);
}

std::string ratio_dir(const ClassRatio& r) {
  return std::to_string(r.positive) + "-" + std::to_string(r.neutral) + "-" +
         std::to_string(r.negative);
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(lr0 > 0)) problems.push_back("train.lr0 must be positive");
  if (!(weight_decay >= 0)) problems.push_back("train.weight_decay must be non-negative");
  if (!(momentum >= 0 && momentum < 1)) problems.push_back("train.momentum must lie in [0, 1)");
  if (!(gamma > 0 && gamma <= 1)) problems.push_back("train.gamma must lie in (0, 1]");
  if (total_iters < 0) problems.push_back("train.total_iters must be non-negative");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (i > 0 && milestones[i] <= milestones[i - 1]) {
      problems.push_back("train.milestones must be strictly increasing");
    }
    if (milestones[i] <= 0 || milestones[i] >= total_iters) {
      problems.push_back("train.milestones must lie in (0, total_iters)");
    }
  }
  if (P < 1) problems.push_back("train.P must be >= 1");
  if (K < 2) problems.push_back("train.K must be >= 2");
  if (frames < 1) problems.push_back("train.frames must be >= 1");
  if (!(triplet.margin >= 0)) problems.push_back("train.margin must be non-negative");
  if (!problems.empty()) throw ConfigError(problems);
}

double lr_at(int iter, const TrainConfig& cfg) {
  int passed = 0;
  for (int m : cfg.milestones) {
    if (m <= iter) ++passed;
  }
  // Rounded to 15 significant digits so decimal schedules come out exact
  // (0.1 * 0.1 would otherwise give 0.010000000000000002).
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", cfg.lr0 * std::pow(cfg.gamma, passed));
  return std::strtod(buf, nullptr);
}

TrainResult train(const Manifest& train_set, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  FrameStore& store) {
  cfg.validate();
  model_cfg.validate();
  std::filesystem::create_directories(out_dir);

  TrainResult result{ScoNet<float>(model_cfg), {}, out_dir / "model_final.ckpt"};
  ScoNet<float>& model = result.model;
  model.init(derive_seed(cfg.seed, {0x1a17ULL}));
  auto refs = model.refs();
  Sgd<float> sgd(refs.params, {cfg.momentum, cfg.weight_decay});

  const TripletIdentity id_kind = triplet_identity(model_cfg.variant);
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out_dir / "train_log.jsonl").string());

  const std::size_t frame_px = static_cast<std::size_t>(model_cfg.in_h) * model_cfg.in_w;
  const auto started = std::chrono::steady_clock::now();
  for (int iter = 0; iter < cfg.total_iters; ++iter) {
    const Batch batch = make_batch(train_set, cfg.P, cfg.K, cfg.frames,
                                   derive_seed(cfg.seed, {0xba7cULL, static_cast<std::uint64_t>(iter)}));
    std::vector<int> lengths, labels, identities;
    int n_total = 0;
    for (const auto& v : batch.views) {
      lengths.push_back(static_cast<int>(v.frames.size()));
      n_total += lengths.back();
      labels.push_back(index_of(v.label));
      identities.push_back(id_kind == TripletIdentity::kLabel ? index_of(v.label) : v.identity);
    }
    Tensor<float> input({n_total, 1, model_cfg.in_h, model_cfg.in_w});
    std::size_t slot = 0;
    for (const auto& v : batch.views) {
      const auto& rec = train_set.records()[v.record_index];
      const auto& loaded = store.frames(rec);
      for (int f : v.frames) {
        const auto& frame = pick(loaded, rec.n_frames(), f);
        if (frame.height() != model_cfg.in_h || frame.width() != model_cfg.in_w) {
          throw ShapeError("frame size " + std::to_string(frame.height()) + "x" +
                           std::to_string(frame.width()) + " does not match the model input");
        }
        copy_frame(frame.mask(), input.data() + slot++ * frame_px);
      }
    }

    const auto out = model.forward(input, lengths, Mode::kTrain);
    const auto ce = cross_entropy(out.logits, labels);
    LossTerm<float> trip;
    if (id_kind != TripletIdentity::kNone) trip = triplet_loss(out.embeddings, identities, cfg.triplet);
    const LossReport report = total_loss(ce.value, trip.value, model_cfg.variant, trip.n_active);
    const double lr = lr_at(iter, cfg);

    if (!std::isfinite(report.total)) {
      const std::string dump = batch.describe(train_set);
      std::ofstream(out_dir / "diverged_batch.txt") << "iteration " << iter << "\n" << dump;
      throw TrainingDiverged("non-finite loss at iteration " + std::to_string(iter) +
                             "; batch composition:\n" + dump);
    }

    model.zero_grad();
    model.backward(id_kind != TripletIdentity::kNone ? trip.grad : Tensor<float>(), ce.grad);
    sgd.step(lr);

    result.log.push_back({iter, lr, report});
    log << json{{"iter", iter},
                {"lr", lr},
                {"ce", report.ce},
                {"triplet", report.triplet},
                {"total", report.total},
                {"n_active_triplets", report.n_active_triplets}}
               .dump()
        << "\n";
    if (cfg.log_interval > 0 && (iter % cfg.log_interval == 0 || iter + 1 == cfg.total_iters)) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      spdlog::info("iter {}/{} lr {:.4g} ce {:.4f} triplet {:.4f} ({:.1f}s)", iter + 1,
                   cfg.total_iters, lr, report.ce, report.triplet, secs);
    }
    if (std::find(cfg.milestones.begin(), cfg.milestones.end(), iter + 1) != cfg.milestones.end()) {
      log.flush();
      save_checkpoint(model, iter + 1, out_dir / milestone_name(iter + 1));
    }
  }
  save_checkpoint(model, cfg.total_iters, result.checkpoint);
  return result;
}

DiagnosticLabel severity_argmax(std::span<const float> logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return label_from_index(best);
}

namespace {

std::vector<int> eval_indices(const SequenceRecord& record, const EvalOptions& options,
                              int available) {
  if (available < 1) throw EmptySequence("sequence " + record.key() + " has no usable frames");
  if (options.frames <= 0) {
    std::vector<int> all(available);
    for (int i = 0; i < available; ++i) all[i] = i;
    return all;
  }
  return sample_frames(available, options.frames, derive_seed(options.seed, {fnv1a(record.key())}));
}

// Eval-mode logits for a group of sequences in one forward pass.
std::vector<std::vector<float>> group_logits(ScoNet<float>& model,
                                             const std::vector<const SequenceRecord*>& group,
                                             FrameStore& store, const EvalOptions& options) {
  const auto& cfg = model.config();
  const std::size_t frame_px = static_cast<std::size_t>(cfg.in_h) * cfg.in_w;
  std::vector<std::vector<int>> picks;
  std::vector<const std::vector<NormalizedFrame>*> loaded;
  std::vector<int> lengths;
  int n_total = 0;
  for (const auto* rec : group) {
    loaded.push_back(&store.frames(*rec));
    picks.push_back(eval_indices(*rec, options, static_cast<int>(loaded.back()->size())));
    lengths.push_back(static_cast<int>(picks.back().size()));
    n_total += lengths.back();
  }
  Tensor<float> input({n_total, 1, cfg.in_h, cfg.in_w});
  std::size_t slot = 0;
  for (std::size_t g = 0; g < group.size(); ++g) {
    for (int i : picks[g]) {
      const auto& frame = (*loaded[g])[i];
      if (frame.height() != cfg.in_h || frame.width() != cfg.in_w) {
        throw ShapeError("frame size does not match the model input");
      }
      copy_frame(frame.mask(), input.data() + slot++ * frame_px);
    }
  }
  const auto out = model.forward(input, lengths, Mode::kEval);
  std::vector<std::vector<float>> rows;
  const int k = out.logits.dim(1);
  for (std::size_t g = 0; g < group.size(); ++g) {
    rows.emplace_back(out.logits.data() + g * k, out.logits.data() + (g + 1) * k);
  }
  return rows;
}

}  // namespace

std::vector<float> sequence_logits(ScoNet<float>& model, const SequenceRecord& record,
                                   FrameStore& store, const EvalOptions& options) {
  return group_logits(model, {&record}, store, options)[0];
}

DiagnosticLabel predict(ScoNet<float>& model, const SequenceRecord& record, FrameStore& store,
                        const EvalOptions& options) {
  return severity_argmax(sequence_logits(model, record, store, options));
}

long ConfusionMatrix::row_sum(DiagnosticLabel l) const {
  long s = 0;
  for (long v : counts[index_of(l)]) s += v;
  return s;
}

long ConfusionMatrix::total() const {
  long s = 0;
  for (const auto& row : counts)
    for (long v : row) s += v;
  return s;
}

EvalReport compute_metrics(const ConfusionMatrix& cm) {
  EvalReport r;
  r.confusion = cm;
  const long total = cm.total();
  if (total > 0) {
    long diag = 0;
    for (int i = 0; i < kNumClasses; ++i) diag += cm.counts[i][i];
    r.accuracy = static_cast<double>(diag) / total;
  }
  const int pos = index_of(DiagnosticLabel::kPositive);
  const int neg = index_of(DiagnosticLabel::kNegative);
  if (const long n = cm.row_sum(DiagnosticLabel::kPositive); n > 0) {
    r.sensitivity = static_cast<double>(cm.counts[pos][pos]) / n;
  }
  if (const long n = cm.row_sum(DiagnosticLabel::kNegative); n > 0) {
    r.specificity = static_cast<double>(cm.counts[neg][neg]) / n;
  }
  return r;
}

namespace {

EvalOutcome finish(std::vector<SequencePrediction> predictions) {
  EvalOutcome out;
  ConfusionMatrix cm;
  std::map<std::string, std::pair<DiagnosticLabel, std::array<int, kNumClasses>>> subjects;
  for (const auto& p : predictions) {
    cm.add(p.truth, p.predicted);
    auto& s = subjects[p.subject_id];
    s.first = p.truth;
    ++s.second[index_of(p.predicted)];
  }
  ConfusionMatrix by_subject;
  for (const auto& [id, s] : subjects) by_subject.add(s.first, majority(s.second));
  out.report = compute_metrics(cm);
  out.subject_report = compute_metrics(by_subject);
  out.predictions = std::move(predictions);
  return out;
}

}  // namespace

EvalOutcome evaluate(const Predictor& predictor, const Manifest& test_set) {
  if (test_set.empty()) throw Error("cannot evaluate on an empty test set");
  std::vector<SequencePrediction> preds;
  for (const auto& rec : test_set.records()) {
    preds.push_back({rec.key(), rec.subject_id, rec.label, predictor(rec), {}});
  }
  return finish(std::move(preds));
}

EvalOutcome evaluate(ScoNet<float>& model, const Manifest& test_set, FrameStore& store,
                     const EvalOptions& options) {
  if (test_set.empty()) throw Error("cannot evaluate on an empty test set");
  std::vector<SequencePrediction> preds;
  const auto& recs = test_set.records();
  const std::size_t step = static_cast<std::size_t>(std::max(1, options.sequences_per_pass));
  for (std::size_t i = 0; i < recs.size(); i += step) {
    std::vector<const SequenceRecord*> group;
    for (std::size_t j = i; j < std::min(recs.size(), i + step); ++j) group.push_back(&recs[j]);
    const auto rows = group_logits(model, group, store, options);
    for (std::size_t g = 0; g < group.size(); ++g) {
      preds.push_back({group[g]->key(), group[g]->subject_id, group[g]->label,
                       severity_argmax(rows[g]), rows[g]});
    }
  }
  return finish(std::move(preds));
}

std::string report_json(const EvalOutcome& outcome) {
  json j = report_to_json(outcome.report);
  j["subject_majority"] = report_to_json(outcome.subject_report);
  return j.dump(2);
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\predicted,positive,neutral,negative\n";
  for (auto l : kAllLabels) {
    out << to_string(l);
    for (long v : cm.counts[index_of(l)]) out << "," << v;
    out << "\n";
  }
  return out.str();
}

void write_eval_outputs(const EvalOutcome& outcome, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "eval_report.json") << report_json(outcome) << "\n";
  std::ofstream(dir / "confusion.csv") << confusion_csv(outcome.report.confusion);
  std::ofstream preds(dir / "predictions.csv");
  preds << "sequence,truth,predicted,logit_positive,logit_neutral,logit_negative\n";
  for (const auto& p : outcome.predictions) {
    preds << p.key << "," << to_string(p.truth) << "," << to_string(p.predicted);
    for (float v : p.logits) preds << "," << v;
    preds << "\n";
  }
  if (!preds) throw IoError("cannot write evaluation outputs under " + dir.string());
}

std::vector<RatioRun> ratio_study(const Manifest& train_pool, const Manifest& test_set,
                                  const RatioStudyConfig& study, const ModelConfig& model_cfg,
                                  const TrainConfig& train_cfg,
                                  const std::filesystem::path& out_dir, FrameStore& store,
                                  const EvalOptions& eval) {
  std::vector<RatioRun> runs;
  for (const auto& ratio : study.ratios) {
    for (auto seed : study.seeds) {
      const Manifest subset = subsample_ratio(train_pool, ratio, seed, study.ratio_total);
      for (auto variant : study.variants) {
        ModelConfig mc = model_cfg;
        mc.variant = variant;
        TrainConfig tc = train_cfg;
        tc.seed = seed;
        const auto dir = out_dir / ratio_dir(ratio) / to_string(variant) / ("seed" + std::to_string(seed));
        spdlog::info("ratio {} variant {} seed {}: training on {} sequences", ratio.str(),
                     to_string(variant), seed, subset.size());
        auto trained = train(subset, mc, tc, dir, store);
        const auto outcome = evaluate(trained.model, test_set, store, eval);
        write_eval_outputs(outcome, dir);
        runs.push_back({ratio, variant, seed, subset.counts(), outcome.report});
        spdlog::info("ratio {} variant {} seed {}: accuracy {:.4f}", ratio.str(), to_string(variant),
                     seed, outcome.report.accuracy.value_or(0.0));
      }
    }
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "ratio_study.csv");
  csv << "ratio,variant,seed,train_positive,train_neutral,train_negative,accuracy,sensitivity,"
         "specificity\n";
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& r : runs) {
    csv << r.ratio.str() << "," << to_string(r.variant) << "," << r.seed << ","
        << r.train_counts[0] << "," << r.train_counts[1] << "," << r.train_counts[2] << ","
        << opt(r.report.accuracy) << "," << opt(r.report.sensitivity) << ","
        << opt(r.report.specificity) << "\n";
  }
  std::ofstream(out_dir / "ratio_table.csv") << ratio_table(runs);
  return runs;
}

std::string ratio_table(const std::vector<RatioRun>& runs) {
  std::vector<std::string> ratios;
  std::vector<Variant> variants;
  std::map<std::pair<std::string, Variant>, std::pair<double, int>> acc;
  for (const auto& r : runs) {
    const auto key = r.ratio.str();
    if (std::find(ratios.begin(), ratios.end(), key) == ratios.end()) ratios.push_back(key);
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) {
      variants.push_back(r.variant);
    }
    auto& a = acc[{key, r.variant}];
    a.first += r.report.accuracy.value_or(0.0);
    ++a.second;
  }
  std::ostringstream out;
  out << "ratio";
  for (auto v : variants) out << "," << to_string(v);
  out << "\n";
  for (const auto& ratio : ratios) {
    out << ratio;
    for (auto v : variants) {
      const auto it = acc.find({ratio, v});
      out << ",";
      if (it != acc.end()) out << it->second.first / it->second.second;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace scogait
