#include "scogait/explain.hpp"

#include <algorithm>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include "scogait/checkpoint.hpp"
#include "scogait/errors.hpp"

namespace scogait {

float HeatmapSequence::max() const {
  float m = 0.0f;
  for (const auto& f : frames)
    for (float v : f) m = std::max(m, v);
  return m;
}

HeatmapSequence activation_map(ScoNet<float>& model, const std::vector<NormalizedFrame>& seq,
                               DiagnosticLabel target) {
  const auto& cfg = model.config();
  if (seq.empty()) throw EmptySequence("activation map needs at least one frame");
  const int n = static_cast<int>(seq.size());
  const std::size_t frame_px = static_cast<std::size_t>(cfg.in_h) * cfg.in_w;

  Tensor<float> input({n, 1, cfg.in_h, cfg.in_w});
  for (int t = 0; t < n; ++t) {
    const auto& m = seq[t].mask();
    if (m.height != cfg.in_h || m.width != cfg.in_w) {
      throw ShapeError("frame size does not match the model input");
    }
    std::copy(m.pixels.begin(), m.pixels.end(), input.data() + t * frame_px);
  }

  model.zero_grad();
  const int lengths[] = {n};
  model.forward(input, lengths, Mode::kEval);
  Tensor<float> d_logits({1, cfg.n_classes});
  d_logits.at(0, index_of(target)) = 1.0f;
  const Tensor<float> d_f = model.backward_to_features(Tensor<float>{}, d_logits);
  model.zero_grad();

  const Tensor<float>& f = model.feature_map();
  const int c = f.dim(1), h = f.dim(2), w = f.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<double> alpha(c, 0.0);
  for (int t = 0; t < n; ++t) {
    for (int ch = 0; ch < c; ++ch) {
      const float* g = &d_f.at(t, ch, 0, 0);
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += g[i];
      alpha[ch] += s;
    }
  }
  bool any = false;
  for (auto& a : alpha) {
    a /= static_cast<double>(n) * hw;
    any = any || a != 0.0;
  }

  HeatmapSequence out;
  out.target = target;
  out.height = cfg.in_h;
  out.width = cfg.in_w;
  out.frames.assign(n, std::vector<float>(frame_px, 0.0f));
  if (!any) {
    spdlog::warn("target logit gradient is zero; returning an all-zero activation map");
    return out;
  }

  for (int t = 0; t < n; ++t) {
    cv::Mat cam(h, w, CV_32F, cv::Scalar(0));
    for (int ch = 0; ch < c; ++ch) {
      const float* fm = &f.at(t, ch, 0, 0);
      const auto a = static_cast<float>(alpha[ch]);
      auto* dst = cam.ptr<float>();
      for (std::size_t i = 0; i < hw; ++i) dst[i] += a * fm[i];
    }
    cam = cv::max(cam, 0.0f);
    cv::Mat up;
    cv::resize(cam, up, cv::Size(cfg.in_w, cfg.in_h), 0, 0, cv::INTER_LINEAR);
    std::copy(up.ptr<float>(), up.ptr<float>() + frame_px, out.frames[t].begin());
  }
  const float peak = out.max();
  if (peak <= 0.0f) {
    spdlog::warn("activation map is zero everywhere after rectification");
    for (auto& fr : out.frames) std::fill(fr.begin(), fr.end(), 0.0f);
    return out;
  }
  for (auto& fr : out.frames)
    for (float& v : fr) v = std::clamp(v / peak, 0.0f, 1.0f);
  return out;
}

HeatmapSequence activation_map(const std::filesystem::path& checkpoint,
                               const std::vector<NormalizedFrame>& seq, DiagnosticLabel target) {
  auto model = load_checkpoint<float>(checkpoint);
  return activation_map(model, seq, target);
}

namespace {

// Silhouette in grey with the colour-mapped heat blended in proportion to
// its intensity; zero heat leaves the silhouette untouched.
cv::Mat composite(const cv::Mat& silhouette, const cv::Mat& heat, const OverlayOptions& o) {
  cv::Mat grey, base, heat8, colour;
  silhouette.convertTo(grey, CV_8U, 200.0);
  cv::cvtColor(grey, base, cv::COLOR_GRAY2BGR);
  heat.convertTo(heat8, CV_8U, 255.0);
  cv::applyColorMap(heat8, colour, cv::COLORMAP_JET);
  cv::Mat out(base.size(), CV_8UC3);
  for (int r = 0; r < base.rows; ++r) {
    for (int col = 0; col < base.cols; ++col) {
      const double a = o.alpha * heat.at<float>(r, col);
      const auto& b = base.at<cv::Vec3b>(r, col);
      const auto& k = colour.at<cv::Vec3b>(r, col);
      auto& d = out.at<cv::Vec3b>(r, col);
      for (int i = 0; i < 3; ++i) d[i] = cv::saturate_cast<uchar>((1.0 - a) * b[i] + a * k[i]);
    }
  }
  if (o.scale > 1) {
    cv::resize(out, out, cv::Size(), o.scale, o.scale, cv::INTER_NEAREST);
  }
  return out;
}

void write_png(const std::filesystem::path& file, const cv::Mat& img) {
  bool ok = false;
  try {
    ok = cv::imwrite(file.string(), img);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + file.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + file.string());
}

}  // namespace

std::vector<std::filesystem::path> render_overlay(const std::vector<NormalizedFrame>& seq,
                                                  const HeatmapSequence& heatmaps,
                                                  const std::filesystem::path& out_dir,
                                                  const OverlayOptions& options) {
  if (seq.size() != heatmaps.size()) {
    throw ShapeError("overlay needs one heatmap per frame");
  }
  if (seq.empty()) throw EmptySequence("nothing to render");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const int h = heatmaps.height, w = heatmaps.width;
  cv::Mat sil_sum(h, w, CV_32F, cv::Scalar(0)), heat_sum(h, w, CV_32F, cv::Scalar(0));
  std::vector<std::filesystem::path> written;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& m = seq[t].mask();
    if (m.height != h || m.width != w) throw ShapeError("heatmap and frame sizes differ");
    cv::Mat sil(h, w, CV_32F);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) sil.at<float>(r, c) = m.at(r, c);
    cv::Mat heat(h, w, CV_32F, const_cast<float*>(heatmaps.frames[t].data()));
    sil_sum += sil;
    heat_sum += heat;
    char name[64];
    std::snprintf(name, sizeof name, "frame_%06zu_cam.png", t);
    written.push_back(out_dir / name);
    write_png(written.back(), composite(sil, heat, options));
  }
  const double inv = 1.0 / static_cast<double>(seq.size());
  written.push_back(out_dir / "average_cam.png");
  write_png(written.back(), composite(sil_sum * inv, heat_sum * inv, options));
  return written;
}

}  // namespace scogait
