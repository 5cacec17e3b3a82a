#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "scogait/checkpoint.hpp"
#include "scogait/errors.hpp"
#include "scogait/optim.hpp"
#include "scogait/synthgait.hpp"
#include "scogait/train_eval.hpp"

using namespace scogait;

namespace {

fs::path where(const std::string& name) {
  return fs::temp_directory_path() / "scogait_test_train" / name;
}

fs::path temp(const std::string& name) {
  auto d = where(name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConfusionMatrix matrix(std::array<std::array<long, 3>, 3> rows) {
  ConfusionMatrix cm;
  cm.counts = rows;
  return cm;
}

ModelConfig small_model(Variant v = Variant::kSconetMt) {
  ModelConfig c;
  c.channels = {4, 8, 8};
  c.strides = {2, 2};
  c.blocks_per_stage = 1;
  c.embed_dim = 16;
  c.variant = v;
  return c;
}

TrainConfig small_train(int iters) {
  TrainConfig t;
  t.total_iters = iters;
  t.milestones = {};
  t.P = 4;
  t.K = 2;
  t.frames = 6;
  t.seed = 7;
  t.log_interval = 0;
  return t;
}

const Manifest& small_dataset() {
  static const Manifest m = [] {
    SynthSpec s;
    s.subjects = {4, 4, 8};
    s.frames_per_sequence = 12;
    s.seed = 5;
    return generate_dataset(s, temp("data"));
  }();
  return m;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 0.1);
  CHECK(lr_at(9999, cfg) == 0.1);
  CHECK(lr_at(10000, cfg) == 0.01);
  CHECK(lr_at(14000, cfg) == 0.001);
  CHECK(lr_at(18000, cfg) == 0.0001);
  CHECK(lr_at(19999, cfg) == 0.0001);
  std::set<double> seen;
  double prev = 1.0;
  for (int i = 0; i < cfg.total_iters; i += 7) {
    const double lr = lr_at(i, cfg);
    CHECK(lr <= prev);
    prev = lr;
    seen.insert(std::round(lr * 1e6) / 1e6);
  }
  CHECK(seen == std::set<double>{0.0001, 0.001, 0.01, 0.1});
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.milestones = {14000, 10000};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.milestones = {10000, 20000};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.K = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("metrics from hand-counted confusion matrices") {
  const auto perfect = compute_metrics(matrix({{{10, 0, 0}, {0, 10, 0}, {0, 0, 80}}}));
  CHECK(*perfect.accuracy == 1.0);
  CHECK(*perfect.sensitivity == 1.0);
  CHECK(*perfect.specificity == 1.0);

  const auto mixed = compute_metrics(matrix({{{9, 1, 0}, {2, 6, 2}, {10, 10, 60}}}));
  CHECK(*mixed.accuracy == doctest::Approx(0.75));
  CHECK(*mixed.sensitivity == doctest::Approx(0.9));
  CHECK(*mixed.specificity == doctest::Approx(0.75));

  const auto all_pos = compute_metrics(matrix({{{10, 0, 0}, {10, 0, 0}, {80, 0, 0}}}));
  CHECK(*all_pos.sensitivity == 1.0);
  CHECK(*all_pos.specificity == 0.0);
  CHECK(*all_pos.accuracy == doctest::Approx(0.1));

  const auto no_pos = compute_metrics(matrix({{{0, 0, 0}, {1, 3, 0}, {0, 2, 5}}}));
  CHECK_FALSE(no_pos.sensitivity.has_value());
  CHECK(no_pos.specificity.has_value());
}

TEST_CASE("metrics are scale invariant") {
  const auto base = matrix({{{9, 1, 0}, {2, 6, 2}, {10, 10, 60}}});
  const auto r1 = compute_metrics(base);
  for (long k : {2L, 3L, 17L}) {
    auto scaled = base;
    for (auto& row : scaled.counts)
      for (auto& v : row) v *= k;
    const auto rk = compute_metrics(scaled);
    CHECK(*rk.accuracy == doctest::Approx(*r1.accuracy));
    CHECK(*rk.sensitivity == doctest::Approx(*r1.sensitivity));
    CHECK(*rk.specificity == doctest::Approx(*r1.specificity));
  }
}

TEST_CASE("severity tie-break") {
  const std::vector<float> a{2.0f, 0.1f, 0.1f}, b{1.0f, 1.0f, 0.2f}, c{0.0f, 0.5f, 0.5f};
  CHECK(severity_argmax(a) == DiagnosticLabel::kPositive);
  CHECK(severity_argmax(b) == DiagnosticLabel::kPositive);
  CHECK(severity_argmax(c) == DiagnosticLabel::kNeutral);
}

TEST_CASE("oracle predictor scores perfectly") {
  const auto& m = small_dataset();
  const auto out = evaluate([](const SequenceRecord& r) { return r.label; }, m);
  CHECK(*out.report.accuracy == 1.0);
  CHECK(*out.report.sensitivity == 1.0);
  CHECK(*out.report.specificity == 1.0);
  CHECK(*out.subject_report.accuracy == 1.0);
  CHECK_THROWS(evaluate([](const SequenceRecord& r) { return r.label; }, Manifest{}));
  const auto csv = confusion_csv(out.report.confusion);
  CHECK(csv.find("positive,4,0,0") != std::string::npos);
}

TEST_CASE("sgd with momentum and decoupled groups") {
  Param<double> w("w", {2}, true), b("b", {1}, false);
  w.value[0] = 1.0;
  w.value[1] = -2.0;
  b.value[0] = 0.5;
  Sgd<double> sgd({&w, &b}, {0.9, 0.1});
  w.grad[0] = 0.5;
  w.grad[1] = 0.0;
  b.grad[0] = 1.0;
  sgd.step(0.1);
  // v = g + wd*w = 0.6, -0.2 ; w -= 0.1 v
  CHECK(w.value[0] == doctest::Approx(0.94));
  CHECK(w.value[1] == doctest::Approx(-1.98));
  CHECK(b.value[0] == doctest::Approx(0.4));  // no decay on this group
  sgd.step(0.1);
  // v = 0.9*0.6 + 0.5 + 0.1*0.94 = 1.134
  CHECK(w.value[0] == doctest::Approx(0.94 - 0.1134));
  CHECK(b.value[0] == doctest::Approx(0.4 - 0.1 * 1.9));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  ScoNet<float> m(small_model());
  m.init(3);
  const auto dir = temp("ckpt");
  save_checkpoint(m, 42, dir / "a.ckpt");
  long iter = 0;
  auto back = load_checkpoint<float>(dir / "a.ckpt", &iter);
  CHECK(iter == 42);
  save_checkpoint(back, 42, dir / "b.ckpt");
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  auto ra = m.refs(), rb = back.refs();
  REQUIRE(ra.params.size() == rb.params.size());
  for (std::size_t i = 0; i < ra.params.size(); ++i) CHECK(ra.params[i]->value == rb.params[i]->value);
  CHECK(read_checkpoint_meta(dir / "a.ckpt").config.embed_dim == 16);

  CHECK_THROWS_AS(load_checkpoint<double>(dir / "a.ckpt"), CheckpointError);
  { std::ofstream(dir / "junk.ckpt") << "definitely not a checkpoint"; }
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "junk.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "missing.ckpt"), CheckpointError);
}

TEST_CASE("zero iterations leaves the initialization") {
  FrameStore store;
  const auto dir = temp("zero");
  auto res = train(small_dataset(), small_model(), small_train(0), dir, store);
  CHECK(res.log.empty());
  long iter = -1;
  auto back = load_checkpoint<float>(res.checkpoint, &iter);
  CHECK(iter == 0);
  auto ra = res.model.refs(), rb = back.refs();
  for (std::size_t i = 0; i < ra.params.size(); ++i) CHECK(ra.params[i]->value == rb.params[i]->value);
  for (std::size_t i = 0; i < ra.buffers.size(); ++i) CHECK(*ra.buffers[i].tensor == *rb.buffers[i].tensor);
}

TEST_CASE("training is reproducible and logs every iteration") {
  FrameStore store;
  auto cfg = small_train(4);
  cfg.milestones = {2};
  const auto a = train(small_dataset(), small_model(), cfg, temp("run_a"), store);
  const auto b = train(small_dataset(), small_model(), cfg, temp("run_b"), store);
  REQUIRE(a.log.size() == 4);
  CHECK(a.log[0].loss.total == b.log[0].loss.total);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss.total == b.log[i].loss.total);
  CHECK(a.log[0].lr == doctest::Approx(0.1));
  CHECK(a.log[3].lr == doctest::Approx(0.01));
  CHECK(fs::exists(where("run_a") / "model_iter_000002.ckpt"));

  std::ifstream log(where("run_a") / "train_log.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(log, line)) {
    CHECK(line.find("\"n_active_triplets\"") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 4);
}

TEST_CASE("short training lowers the classification loss") {
  FrameStore store;
  auto cfg = small_train(150);
  cfg.milestones = {100};
  const auto res = train(small_dataset(), small_model(), cfg, temp("smoke"), store);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) {
    first += res.log[i].loss.ce / 20;
    last += res.log[res.log.size() - 1 - i].loss.ce / 20;
  }
  MESSAGE("mean CE first 20: " << first << ", last 20: " << last);
  CHECK(last < first);
}

TEST_CASE("duplicated frames do not change the prediction") {
  const auto& m = small_dataset();
  ScoNet<float> model(small_model());
  model.init(8);
  FrameStore store;
  const auto& rec = m.records()[0];
  SequenceRecord dup = rec;
  dup.sequence_id += "_dup";
  dup.frame_paths.clear();
  for (const auto& p : rec.frame_paths) {
    dup.frame_paths.push_back(p);
    dup.frame_paths.push_back(p);
  }
  const auto a = sequence_logits(model, rec, store);
  const auto b = sequence_logits(model, dup, store);
  CHECK(a == b);
  CHECK(predict(model, rec, store) == predict(model, dup, store));

  EvalOptions fixed;
  fixed.frames = 5;
  CHECK(sequence_logits(model, rec, store, fixed).size() == 3);
}
