// Acceptance suite: one [PASS]/[FAIL]/[SKIP] line per criterion.
// Usage: acceptance [criterion ...]; with no arguments every criterion runs.
// Work files go to $SCOGAIT_ACCEPTANCE_DIR (default: <tmp>/scogait_acceptance).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "scogait/checkpoint.hpp"
#include "scogait/config.hpp"
#include "scogait/errors.hpp"
#include "scogait/explain.hpp"
#include "scogait/losses.hpp"
#include "scogait/model.hpp"
#include "scogait/random.hpp"
#include "scogait/synthgait.hpp"
#include "scogait/train_eval.hpp"
#include "support/blobs.hpp"
#include "support/gradcheck.hpp"

using namespace scogait;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
  return {ok ? Status::kPass : Status::kFail, std::move(detail)};
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path work_dir() {
  if (const char* d = std::getenv("SCOGAIT_ACCEPTANCE_DIR"); d && *d) return d;
  return fs::temp_directory_path() / "scogait_acceptance";
}

// Exactly the columns [first, last] are foreground, on every row.
bool is_column_block(const BinaryMask& m, int first, int last) {
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (m.at(r, c) != (c >= first && c <= last ? 1 : 0)) return false;
  return true;
}

// ---------------------------------------------------------------- preprocessing

Outcome preprocessing() {
  const auto t0 = Clock::now();
  Rng rng(1000);
  int bad_shape = 0, bad_binary = 0, bad_idem = 0, bad_translate = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto raw = testing::random_blob(rng);
    const int dy = static_cast<int>(rng.index(41)), dx = static_cast<int>(rng.index(41));
    try {
      const auto out = normalize_silhouette(raw).mask();
      if (out.height != 64 || out.width != 44) {
        ++bad_shape;
        continue;
      }
      if (std::any_of(out.pixels.begin(), out.pixels.end(), [](auto p) { return p > 1; })) ++bad_binary;
      if (!(normalize_silhouette(out).mask() == out)) ++bad_idem;
      if (!(normalize_silhouette(testing::shifted(raw, dy, dx)).mask() == out)) ++bad_translate;
    } catch (const EmptySilhouette&) {
      ++rejected;
    }
  }
  // 128-tall, 20-wide block: scale 1/2 gives 64x10 at columns 17..26.
  const bool rect_full =
      is_column_block(normalize_silhouette(testing::filled_rect(128, 128, 0, 54, 128, 20)).mask(), 17, 26);
  // 64-tall, 20-wide block: scale 1 keeps 64x20 at columns 12..31.
  const bool rect_half =
      is_column_block(normalize_silhouette(testing::filled_rect(128, 128, 32, 54, 64, 20)).mask(), 12, 31);
  const double secs = seconds_since(t0);
  const int bad = bad_shape + bad_binary + bad_idem + bad_translate + rejected;
  return pass_if(bad == 0 && rect_full && rect_half && secs < 60.0,
                 fmt("1000 blobs: shape %d, binary %d, idempotence %d, translation %d failures, "
                     "%d rejected; rectangles %s/%s; %.1fs (limit 60s)",
                     bad_shape, bad_binary, bad_idem, bad_translate, rejected,
                     rect_full ? "ok" : "wrong", rect_half ? "ok" : "wrong", secs));
}

// ---------------------------------------------------------------- pooling and shapes

Outcome pooling_shapes() {
  const auto t0 = Clock::now();
  Rng rng(2000);
  std::vector<std::string> problems;

  // Temporal pooling is invariant to the frame order within each view.
  double tp_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> lengths;
    const int views = 1 + static_cast<int>(rng.index(4));
    int total = 0;
    for (int v = 0; v < views; ++v) {
      lengths.push_back(1 + static_cast<int>(rng.index(8)));
      total += lengths.back();
    }
    Tensor<double> f({total, 3, 4, 2});
    for (auto& x : f.values()) x = rng.normal();
    std::vector<int> order(total);
    int start = 0;
    for (int len : lengths) {
      for (int i = 0; i < len; ++i) order[start + i] = start + i;
      for (int i = len - 1; i > 0; --i) std::swap(order[start + i], order[start + rng.index(i + 1)]);
      start += len;
    }
    const std::size_t px = f.size() / total;
    Tensor<double> g(f.shape());
    for (int i = 0; i < total; ++i)
      std::copy(f.data() + order[i] * px, f.data() + (order[i] + 1) * px, g.data() + i * px);
    for (auto kind : {TemporalPooling::kMax, TemporalPooling::kMean}) {
      const auto a = temporal_pool(f, lengths, kind), b = temporal_pool(g, lengths, kind);
      for (std::size_t i = 0; i < a.size(); ++i) tp_err = std::max(tp_err, std::abs(a[i] - b[i]));
    }
  }
  if (tp_err > 1e-6) problems.push_back(fmt("TP permutation error %.3g", tp_err));

  // Whole-model frame permutation in eval mode.
  ModelConfig small;
  small.channels = {8, 16, 32};
  small.strides = {2, 2};
  small.blocks_per_stage = 1;
  small.embed_dim = 32;
  ScoNet<float> net(small);
  net.init(5);
  Tensor<float> frames({12, 1, 64, 44});
  for (auto& x : frames.values()) x = rng.bernoulli(0.4) ? 1.0f : 0.0f;
  const int one_view[] = {12};
  const auto base = net.forward(frames, one_view, Mode::kEval).logits;
  Tensor<float> reversed(frames.shape());
  const std::size_t fpx = 64 * 44;
  for (int i = 0; i < 12; ++i)
    std::copy(frames.data() + (11 - i) * fpx, frames.data() + (12 - i) * fpx, reversed.data() + i * fpx);
  const auto rev = net.forward(reversed, one_view, Mode::kEval).logits;
  double model_err = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i)
    model_err = std::max(model_err, static_cast<double>(std::abs(base[i] - rev[i])));
  if (model_err > 1e-6) problems.push_back(fmt("model permutation error %.3g", model_err));

  // Horizontal pooling against a per-strip brute force.
  double hp_err = 0.0;
  for (int parts : {1, 2, 4, 8, 16}) {
    Tensor<double> z({2, 3, 16, 5});
    for (auto& x : z.values()) x = rng.normal();
    const auto pooled = horizontal_pool(z, parts);
    const int rows = 16 / parts;
    for (int v = 0; v < 2; ++v)
      for (int p = 0; p < parts; ++p)
        for (int c = 0; c < 3; ++c) {
          double mx = -1e300, sum = 0.0;
          for (int r = p * rows; r < (p + 1) * rows; ++r)
            for (int x = 0; x < 5; ++x) {
              mx = std::max(mx, z.at(v, c, r, x));
              sum += z.at(v, c, r, x);
            }
          hp_err = std::max(hp_err, std::abs(pooled.at(v, p, c) - (mx + sum / (rows * 5))));
        }
  }
  if (hp_err > 1e-9) problems.push_back(fmt("HP brute-force error %.3g", hp_err));

  // Shape contracts of the full-size model.
  ModelConfig full;
  ScoNet<float> big(full);
  big.init(7);
  for (int n : {1, 2, 15, 30, 60}) {
    Tensor<float> x({2 * n, 1, 64, 44});
    for (auto& v : x.values()) v = rng.bernoulli(0.4) ? 1.0f : 0.0f;
    const int lengths[] = {n, n};
    const auto out = big.forward(x, lengths, Mode::kEval);
    const auto& fm = big.feature_map();
    if (fm.shape() != std::vector<int>{2 * n, 256, 16, 11} ||
        out.embeddings.shape() != std::vector<int>{2, 16, 256} ||
        out.logits.shape() != std::vector<int>{2, 3}) {
      problems.push_back(fmt("wrong shapes for n=%d", n));
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 120.0) problems.push_back("over the 2 min limit");
  std::string detail = fmt("TP err %.2g, model perm err %.2g, HP err %.2g, shapes n=1,2,15,30,60; %.1fs",
                           tp_err, model_err, hp_err, secs);
  for (const auto& p : problems) detail += "; " + p;
  return pass_if(problems.empty(), detail);
}

// ---------------------------------------------------------------- losses

Outcome loss_oracles() {
  const auto t0 = Clock::now();
  std::vector<std::string> problems;

  const std::vector<double> uniform{0.0, 0.0, 0.0};
  for (int label = 0; label < 3; ++label) {
    if (std::abs(cross_entropy(uniform, label) - std::log(3.0)) > 1e-6) problems.push_back("CE uniform");
  }
  const std::vector<double> extreme{-1000.0, 1000.0, -1000.0};
  const double ce_ext = cross_entropy(extreme, 0);
  if (!(std::abs(ce_ext - 2000.0) <= 1e-6)) problems.push_back(fmt("CE extreme %.9g", ce_ext));

  int batches = 0;
  for (int p = 1; p <= 4; ++p) {
    for (int k = 1; k <= 3; ++k) {
      std::vector<int> ids;
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < k; ++j) ids.push_back(i);
      TripletSet brute;
      const int b = p * k;
      for (int a = 0; a < b; ++a)
        for (int q = 0; q < b; ++q)
          for (int n = 0; n < b; ++n)
            if (a != q && ids[a] == ids[q] && ids[a] != ids[n]) brute.push_back({a, q, n});
      const auto mined = mine_triplets(ids);
      const std::size_t expected = static_cast<std::size_t>(p * k * (k - 1) * (p - 1) * k);
      if (mined != brute || mined.size() != expected) {
        problems.push_back(fmt("mining P=%d K=%d", p, k));
      }
      ++batches;
    }
  }

  auto line = [](std::vector<double> xs) {
    Tensor<double> e({static_cast<int>(xs.size()), 1, 1});
    std::copy(xs.begin(), xs.end(), e.data());
    return e;
  };
  const TripletSet one{{0, 1, 2}};
  const double t_sat = triplet_loss(line({0.0, 1.0, 2.0}), one).value;  // max(0, 1 - 4 + 0.2)
  const double t_eq = triplet_loss(line({0.0, 1.0, -1.0}), one).value;  // max(0, 1 - 1 + 0.2)
  const double t_pos = triplet_loss(line({0.0, 2.0, 1.0}), one).value;  // max(0, 4 - 1 + 0.2)
  if (t_sat != 0.0) problems.push_back(fmt("triplet satisfied %.17g", t_sat));
  if (t_eq != 0.2) problems.push_back(fmt("triplet at margin %.17g", t_eq));
  if (t_pos != 3.2) problems.push_back(fmt("triplet violated %.17g", t_pos));

  Rng rng(3000);
  double add_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double ce = rng.uniform(0.0, 5.0), tr = rng.uniform(0.0, 5.0);
    for (auto v : {Variant::kSconetMt, Variant::kSconetTriplet, Variant::kSconetPlainMt}) {
      add_err = std::max(add_err, std::abs(total_loss(ce, tr, v).total - (ce + tr)));
    }
    if (total_loss(ce, tr, Variant::kSconet).total != ce) problems.push_back("CE-only total");
  }
  if (add_err > 1e-9) problems.push_back(fmt("additivity error %.3g", add_err));
  const double secs = seconds_since(t0);
  if (secs >= 60.0) problems.push_back("over the 1 min limit");
  std::string detail = fmt("CE(0,0,0)=%.9f, CE(extreme)=%.6f, mining %d batches, triplet "
                           "{%.1f, %.1f, %.1f}, additivity err %.2g; %.2fs",
                           cross_entropy(uniform, 0), ce_ext, batches, t_sat, t_eq, t_pos, add_err,
                           secs);
  for (const auto& p : problems) detail += "; " + p;
  return pass_if(problems.empty(), detail);
}

// ---------------------------------------------------------------- gradients

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto s = testing::check_encoder_gradients(1e-3, 1e-6);
  const double frac = s.checked ? static_cast<double>(s.within) / s.checked : 0.0;
  const double secs = seconds_since(t0);
  return pass_if(frac >= 0.95 && s.checked > 0 && secs < 300.0,
                 fmt("%d/%d parameters within 1e-3 (%.1f%%, need 95%%), max rel err %.2g; %.1fs",
                     s.within, s.checked, 100.0 * frac, s.max_rel, secs));
}

// ---------------------------------------------------------------- schedule

Outcome schedule() {
  const TrainConfig cfg;
  const double a = lr_at(0, cfg), b = lr_at(10000, cfg), c = lr_at(14000, cfg), d = lr_at(18000, cfg);
  return pass_if(a == 0.1 && b == 0.01 && c == 0.001 && d == 0.0001,
                 fmt("lr_at 0/10000/14000/18000 = %.17g / %.17g / %.17g / %.17g", a, b, c, d));
}

// ---------------------------------------------------------------- metrics

Outcome metrics() {
  auto cm = [](std::array<std::array<long, 3>, 3> rows) {
    ConfusionMatrix m;
    m.counts = rows;
    return compute_metrics(m);
  };
  const auto mixed = cm({{{9, 1, 0}, {2, 6, 2}, {10, 10, 60}}});
  const auto all_pos = cm({{{10, 0, 0}, {10, 0, 0}, {80, 0, 0}}});
  const bool ok = mixed.accuracy == 0.75 && mixed.sensitivity == 0.9 && mixed.specificity == 0.75 &&
                  all_pos.accuracy == 0.1 && all_pos.sensitivity == 1.0 &&
                  all_pos.specificity == 0.0;
  return pass_if(ok, fmt("hand-counted: acc %.17g sens %.17g spec %.17g; all-positive: acc %.17g "
                         "sens %.17g spec %.17g",
                         mixed.accuracy.value_or(-1), mixed.sensitivity.value_or(-1),
                         mixed.specificity.value_or(-1), all_pos.accuracy.value_or(-1),
                         all_pos.sensitivity.value_or(-1), all_pos.specificity.value_or(-1)));
}

// ---------------------------------------------------------------- synthetic training

ModelConfig desk_model(Variant v) {
  ModelConfig m;
  m.channels = {8, 16, 32};
  m.strides = {2, 2};
  m.blocks_per_stage = 1;
  m.parts = 16;
  m.embed_dim = 32;
  m.variant = v;
  return m;
}

TrainConfig scaled_schedule(int total, std::uint64_t seed) {
  TrainConfig t;
  t.total_iters = total;
  t.milestones = {total / 2, total * 7 / 10, total * 9 / 10};
  t.frames = 10;
  t.seed = seed;
  t.log_interval = 0;
  return t;
}

Manifest synth_set(const std::string& name, std::array<int, 3> subjects, std::uint64_t seed) {
  SynthSpec s;
  s.subjects = subjects;
  s.frames_per_sequence = 60;
  s.seed = seed;
  s.subject_prefix = name;
  const fs::path root = work_dir() / "data" / name;
  fs::remove_all(root);
  return generate_dataset(s, root);
}

std::string cm_string(const ConfusionMatrix& cm) {
  std::string s;
  for (const auto& row : cm.counts) s += fmt("%s[%ld %ld %ld]", s.empty() ? "" : " ", row[0], row[1], row[2]);
  return s;
}

fs::path e2e_checkpoint() { return work_dir() / "e2e" / "model_final.ckpt"; }

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const Manifest train_set = synth_set("e2e_train", {20, 20, 160}, 1);
  const Manifest test_set = synth_set("e2e_test", {10, 10, 80}, 2);
  FrameStore store;
  const fs::path dir = work_dir() / "e2e";
  fs::remove_all(dir);
  auto result = train(train_set, desk_model(Variant::kSconetMt), scaled_schedule(2000, 0), dir, store);
  const auto outcome = evaluate(result.model, test_set, store);
  const double secs = seconds_since(t0);
  const double acc = outcome.report.accuracy.value_or(0.0);
  return pass_if(acc >= 0.90 && secs <= 1800.0,
                 fmt("ScoNet-MT, 2000 iterations: accuracy %.3f (need >= 0.90), sensitivity %.3f, "
                     "specificity %.3f, confusion %s; %.0fs (limit 1800s)",
                     acc, outcome.report.sensitivity.value_or(-1), outcome.report.specificity.value_or(-1),
                     cm_string(outcome.report.confusion).c_str(), secs));
}

Outcome imbalance_trend() {
  const auto t0 = Clock::now();
  const Manifest pool = synth_set("ratio_pool", {20, 20, 200}, 3);
  const Manifest test_set = synth_set("ratio_test", {10, 10, 80}, 2);
  RatioStudyConfig study;
  study.ratios = {{1, 1, 8}, {1, 1, 16}};
  study.variants = {Variant::kSconet, Variant::kSconetMt};
  study.seeds = {0, 1, 2};
  study.ratio_total = 200;
  FrameStore store;
  const fs::path dir = work_dir() / "ratio_study";
  fs::remove_all(dir);
  const auto runs = ratio_study(pool, test_set, study, desk_model(Variant::kSconetMt),
                                scaled_schedule(1000, 0), dir, store);

  // acc[ratio][variant][seed]
  std::map<std::string, std::map<Variant, std::map<std::uint64_t, double>>> acc;
  for (const auto& r : runs) acc[r.ratio.str()][r.variant][r.seed] = r.report.accuracy.value_or(0.0);
  bool ok = true;
  std::string detail;
  for (const std::string ratio : {"1:1:8", "1:1:16"}) {
    double mean_s = 0.0, mean_mt = 0.0;
    std::string gaps;
    for (std::uint64_t seed : study.seeds) {
      const double s = acc[ratio][Variant::kSconet][seed], m = acc[ratio][Variant::kSconetMt][seed];
      mean_s += s / study.seeds.size();
      mean_mt += m / study.seeds.size();
      gaps += fmt("%s%+.2f", gaps.empty() ? "" : " ", m - s);
      if (ratio == "1:1:16" && m < s) ok = false;
    }
    if (mean_mt < mean_s) ok = false;
    detail += fmt("%s%s: ScoNet %.3f, ScoNet-MT %.3f (per-seed gaps %s)", detail.empty() ? "" : "; ",
                  ratio.c_str(), mean_s, mean_mt, gaps.c_str());
  }
  detail += fmt("; 1000 iterations per run; %.0fs", seconds_since(t0));
  return pass_if(ok, detail);
}

std::vector<NormalizedFrame> walker_frames(const WalkerParams& p, int n) {
  std::vector<NormalizedFrame> out;
  for (const auto& f : render_walker(p, n)) out.push_back(normalize_silhouette(f));
  return out;
}

double top_third_mean(const HeatmapSequence& h) {
  const int rows = static_cast<int>(std::floor(h.height / 3.0 - 0.5)) + 1;  // row centres above h/3
  double sum = 0.0;
  for (std::size_t t = 0; t < h.size(); ++t)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < h.width; ++c) sum += h.at(t, r, c);
  return sum / (static_cast<double>(h.size()) * rows * h.width);
}

Outcome cam_direction() {
  const auto t0 = Clock::now();
  if (!fs::exists(e2e_checkpoint())) {
    const auto e2e = end_to_end();
    if (!fs::exists(e2e_checkpoint())) return {Status::kFail, "no trained model: " + e2e.detail};
  }
  auto model = load_checkpoint<float>(e2e_checkpoint());
  SynthSpec spec;
  spec.seed = 4242;  // subjects unseen in training
  Rng rng(4243);
  double tilted = 0.0, symmetric = 0.0;
  int wins = 0;
  for (int i = 0; i < 20; ++i) {
    WalkerParams p = draw_subject(spec, DiagnosticLabel::kNegative, i);
    p.trunk_lean = 0.0;
    p.head_offset = 0.0;
    p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p.seed = derive_seed(4244, {static_cast<std::uint64_t>(i)});
    WalkerParams q = p;
    p.shoulder_tilt = i % 2 ? -15.0 : 15.0;
    q.shoulder_tilt = 0.0;
    const double a = top_third_mean(activation_map(model, walker_frames(p, 60), DiagnosticLabel::kPositive));
    const double b = top_third_mean(activation_map(model, walker_frames(q, 60), DiagnosticLabel::kPositive));
    tilted += a / 20;
    symmetric += b / 20;
    wins += a > b;
  }
  return pass_if(tilted > symmetric,
                 fmt("mean top-third activation (target positive): tilt 15 deg %.4f vs 0 deg %.4f; "
                     "tilted higher in %d/20 pairs; %.0fs",
                     tilted, symmetric, wins, seconds_since(t0)));
}

// ---------------------------------------------------------------- public dataset

Outcome dataset_reproduction() {
  const char* root = std::getenv("SCOLIOSIS1K_ROOT");
  if (!root || !*root) return {Status::kSkip, "set SCOLIOSIS1K_ROOT to a prepared dataset root"};
  const auto t0 = Clock::now();
  RunConfig rc;
  rc.data.root = root;
  const char* train_list = std::getenv("SCOLIOSIS1K_TRAIN_LIST");
  const char* test_list = std::getenv("SCOLIOSIS1K_TEST_LIST");
  if (train_list && test_list) {
    rc.split.mode = SplitMode::kSequenceList;
    rc.split.train_list = train_list;
    rc.split.test_list = test_list;
  }
  const fs::path cache = rc.data.root / "manifest.jsonl";
  const Manifest all = fs::exists(cache) ? read_manifest_jsonl(cache, rc.data.root) : build_manifest(rc.data.root);
  const auto [train_set, test_set] = split_train_test(all, rc.split);
  FrameStore store;
  const fs::path dir = work_dir() / "scoliosis1k";
  auto result = train(train_set, rc.model, rc.train, dir, store);
  const auto outcome = evaluate(result.model, test_set, store);
  const auto& r = outcome.report;
  const double acc = 100 * r.accuracy.value_or(0), sens = 100 * r.sensitivity.value_or(0),
               spec = 100 * r.specificity.value_or(0);
  return pass_if(std::abs(acc - 82.0) <= 3.0 && std::abs(sens - 99.0) <= 1.5 &&
                     std::abs(spec - 76.5) <= 4.0,
                 fmt("accuracy %.1f%% (82.0 +/- 3), sensitivity %.1f%% (99.0 +/- 1.5), specificity "
                     "%.1f%% (76.5 +/- 4); %.0fs",
                     acc, sens, spec, seconds_since(t0)));
}

struct Criterion {
  std::string name;
  std::string label;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> all = {
      {"preprocessing", "Preprocessing suite", preprocessing},
      {"pooling", "Pooling/shape suite", pooling_shapes},
      {"losses", "Loss oracle suite", loss_oracles},
      {"gradcheck", "Gradient check", gradient_check},
      {"schedule", "Schedule check", schedule},
      {"metrics", "Metrics oracle", metrics},
      {"e2e", "End-to-end synthetic separability", end_to_end},
      {"imbalance", "Imbalance trend", imbalance_trend},
      {"cam", "CAM directional check", cam_direction},
      {"dataset", "Dataset reproduction (optional)", dataset_reproduction},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  fs::create_directories(work_dir());
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.name)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "[PASS]" : o.status == Status::kFail ? "[FAIL]" : "[SKIP]";
    failures += o.status == Status::kFail;
    std::cout << tag << " " << c.label << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
