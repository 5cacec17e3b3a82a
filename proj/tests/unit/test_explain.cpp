#include <filesystem>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>

#include "doctest.h"
#include "scogait/checkpoint.hpp"
#include "scogait/errors.hpp"
#include "scogait/explain.hpp"
#include "scogait/synthgait.hpp"

using namespace scogait;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.channels = {8, 16, 32};
  c.strides = {2, 2};
  c.blocks_per_stage = 1;
  c.embed_dim = 16;
  return c;
}

std::vector<NormalizedFrame> walker(int n, double tilt = 0.0) {
  WalkerParams p;
  p.shoulder_tilt = tilt;
  std::vector<NormalizedFrame> out;
  for (const auto& f : render_walker(p, n)) out.push_back(normalize_silhouette(f, {}));
  return out;
}

Param<float>& classifier(ScoNet<float>& m) {
  for (auto* p : m.refs().params)
    if (p->name == "head.classifier.weight") return *p;
  throw std::logic_error("classifier weight missing");
}

fs::path temp(const std::string& name) {
  auto d = fs::temp_directory_path() / "scogait_test_explain" / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("zero classifier gives an all-zero map") {
  ScoNet<float> m(small_model());
  m.init(3);
  classifier(m).value.zero();
  const auto seq = walker(6);
  const auto h = activation_map(m, seq, DiagnosticLabel::kPositive);
  CHECK(h.size() == seq.size());
  CHECK(h.height == 64);
  CHECK(h.width == 44);
  CHECK(h.max() == 0.0f);
}

TEST_CASE("maps are normalized over the sequence") {
  ScoNet<float> m(small_model());
  m.init(5);
  const auto seq = walker(8, 10.0);
  for (auto target : kAllLabels) {
    const auto h = activation_map(m, seq, target);
    REQUIRE(h.size() == 8);
    if (h.max() == 0.0f) continue;
    CHECK(h.max() == 1.0f);
    for (const auto& f : h.frames) {
      CHECK(f.size() == 64u * 44u);
      for (float v : f) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
}

TEST_CASE("identical class heads give identical maps") {
  ScoNet<float> m(small_model());
  m.init(7);
  auto& w = classifier(m).value;
  for (int p = 0; p < w.dim(0); ++p)
    for (int j = 0; j < w.dim(1); ++j) w.at(p, j, 1) = w.at(p, j, 2) = w.at(p, j, 0);
  const auto seq = walker(5, 12.0);
  const auto a = activation_map(m, seq, DiagnosticLabel::kPositive);
  const auto b = activation_map(m, seq, DiagnosticLabel::kNeutral);
  const auto c = activation_map(m, seq, DiagnosticLabel::kNegative);
  CHECK(a.frames == b.frames);
  CHECK(a.frames == c.frames);
}

TEST_CASE("activation map leaves gradients clear and the model unchanged") {
  ScoNet<float> m(small_model());
  m.init(9);
  const auto seq = walker(4);
  const auto first = activation_map(m, seq, DiagnosticLabel::kPositive);
  for (auto* p : m.refs().params)
    for (float g : p->grad.values()) REQUIRE(g == 0.0f);
  CHECK(activation_map(m, seq, DiagnosticLabel::kPositive).frames == first.frames);
}

TEST_CASE("checkpoint overload matches the in-memory model") {
  ScoNet<float> m(small_model());
  m.init(11);
  const auto dir = temp("ckpt");
  fs::create_directories(dir);
  save_checkpoint(m, 0, dir / "m.ckpt");
  const auto seq = walker(3, 8.0);
  CHECK(activation_map(dir / "m.ckpt", seq, DiagnosticLabel::kNeutral).frames ==
        activation_map(m, seq, DiagnosticLabel::kNeutral).frames);
}

TEST_CASE("activation map rejects bad input") {
  ScoNet<float> m(small_model());
  m.init(1);
  CHECK_THROWS_AS(activation_map(m, {}, DiagnosticLabel::kPositive), EmptySequence);
  NormalizeOptions small{32, 22};
  std::vector<NormalizedFrame> seq{normalize_silhouette(render_walker({}, 1)[0], small)};
  CHECK_THROWS_AS(activation_map(m, seq, DiagnosticLabel::kPositive), ShapeError);
}

TEST_CASE("overlay writes one file per frame plus the average") {
  ScoNet<float> m(small_model());
  m.init(13);
  const auto seq = walker(30, 10.0);
  const auto h = activation_map(m, seq, DiagnosticLabel::kPositive);
  const auto dir = temp("overlay");
  const auto files = render_overlay(seq, h, dir);
  REQUIRE(files.size() == 31);
  CHECK(files.front().filename() == "frame_000000_cam.png");
  CHECK(files[29].filename() == "frame_000029_cam.png");
  CHECK(files.back().filename() == "average_cam.png");
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 31);
  const auto img = cv::imread(files.front().string(), cv::IMREAD_UNCHANGED);
  CHECK(img.channels() == 3);
  CHECK(img.rows == 64 * 4);
  CHECK(img.cols == 44 * 4);

  const auto again = render_overlay(seq, h, temp("overlay_again"));
  for (std::size_t i = 0; i < files.size(); ++i) CHECK(slurp(files[i]) == slurp(again[i]));
}

TEST_CASE("empty heatmap renders the bare silhouette") {
  const auto seq = walker(2);
  HeatmapSequence h;
  h.height = 64;
  h.width = 44;
  h.frames.assign(2, std::vector<float>(64 * 44, 0.0f));
  const auto files = render_overlay(seq, h, temp("bare"), {.alpha = 0.6, .scale = 1});
  const auto img = cv::imread(files[0].string(), cv::IMREAD_COLOR);
  REQUIRE(img.rows == 64);
  const auto& mask = seq[0].mask();
  bool all_match = true;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 44; ++c) {
      const auto px = img.at<cv::Vec3b>(r, c);
      const int want = mask.at(r, c) ? 200 : 0;
      all_match = all_match && px[0] == want && px[1] == want && px[2] == want;
    }
  }
  CHECK(all_match);
}

TEST_CASE("overlay requires matching lengths") {
  const auto seq = walker(3);
  HeatmapSequence h;
  h.height = 64;
  h.width = 44;
  h.frames.assign(2, std::vector<float>(64 * 44, 0.0f));
  CHECK_THROWS_AS(render_overlay(seq, h, temp("mismatch")), ShapeError);
}
