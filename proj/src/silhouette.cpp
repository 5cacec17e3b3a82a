#include "scogait/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "scogait/errors.hpp"

namespace scogait {

namespace {

struct Bounds {
  int top, bottom, left, right;  // inclusive
};

std::optional<Bounds> foreground_bounds(const BinaryMask& m) {
  Bounds b{m.height, -1, m.width, -1};
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      b.top = std::min(b.top, r);
      b.bottom = std::max(b.bottom, r);
      b.left = std::min(b.left, c);
      b.right = std::max(b.right, c);
    }
  }
  if (b.bottom < 0) return std::nullopt;
  return b;
}

// Resamples `src` (cropped to `b`) to out_h x out_w using half-pixel centres,
// then thresholds at 0.5.
BinaryMask resample(const BinaryMask& src, const Bounds& b, int out_h, int out_w,
                    Interpolation interp) {
  const int in_h = b.bottom - b.top + 1;
  const int in_w = b.right - b.left + 1;
  const double ry = static_cast<double>(in_h) / out_h;
  const double rx = static_cast<double>(in_w) / out_w;
  BinaryMask out(out_h, out_w);
  auto px = [&](int y, int x) -> double { return src.at(b.top + y, b.left + x); };
  for (int y = 0; y < out_h; ++y) {
    const double sy = (y + 0.5) * ry - 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double sx = (x + 0.5) * rx - 0.5;
      double v;
      if (interp == Interpolation::kNearest) {
        const int iy = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, in_h - 1);
        const int ix = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, in_w - 1);
        v = px(iy, ix);
      } else {
        const double cy = std::clamp(sy, 0.0, static_cast<double>(in_h - 1));
        const double cx = std::clamp(sx, 0.0, static_cast<double>(in_w - 1));
        const int y0 = static_cast<int>(std::floor(cy));
        const int x0 = static_cast<int>(std::floor(cx));
        const int y1 = std::min(y0 + 1, in_h - 1);
        const int x1 = std::min(x0 + 1, in_w - 1);
        const double fy = cy - y0, fx = cx - x0;
        v = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) +
            fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
      }
      out.at(y, x) = v >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

// Centroid of the columns [offset, offset + width) of `m`, in window coordinates.
std::optional<double> window_centroid(const BinaryMask& m, int offset, int width) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < m.height; ++r) {
    for (int c = std::max(offset, 0); c < std::min(offset + width, m.width); ++c) {
      if (m.at(r, c)) {
        sum += (c - offset) + 0.5;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

int round_half_toward_zero(double v) {
  const double r = std::round(v);
  if (std::abs(v - std::trunc(v)) == 0.5) return static_cast<int>(std::trunc(v));
  return static_cast<int>(r);
}

BinaryMask normalize_once(const BinaryMask& frame, const NormalizeOptions& opt) {
  const auto bounds = foreground_bounds(frame);
  if (!bounds) throw EmptySilhouette("silhouette has no foreground pixels");
  const int crop_h = bounds->bottom - bounds->top + 1;
  const int crop_w = bounds->right - bounds->left + 1;
  const double scale = static_cast<double>(opt.target_h) / crop_h;
  const int scaled_w = std::max(1, static_cast<int>(std::lround(crop_w * scale)));
  const BinaryMask scaled = resample(frame, *bounds, opt.target_h, scaled_w, opt.interpolation);

  const double half = opt.target_w / 2.0;
  const auto full = window_centroid(scaled, 0, scaled_w);
  if (!full) throw EmptySilhouette("foreground vanished after rescaling");

  // Left edge of the output window in scaled coordinates; ties round toward
  // zero so an already-centred frame (|offset| <= 0.5) stays put.
  int offset = round_half_toward_zero(*full - half);
  if (scaled_w > opt.target_w) {
    spdlog::debug("silhouette wider than {} after rescale ({}), cropping about centroid",
                  opt.target_w, scaled_w);
  }
  // Cropping can move the centroid; walk the window until it settles.
  std::set<int> visited{offset};
  for (;;) {
    const auto g = window_centroid(scaled, offset, opt.target_w);
    if (!g || std::abs(*g - half) <= 0.5) break;
    const int next = offset + (*g > half ? 1 : -1);
    if (!visited.insert(next).second) break;
    offset = next;
  }

  BinaryMask out(opt.target_h, opt.target_w);
  for (int r = 0; r < opt.target_h; ++r) {
    for (int c = 0; c < opt.target_w; ++c) {
      const int sc = c + offset;
      if (sc >= 0 && sc < scaled_w) out.at(r, c) = scaled.at(r, sc);
    }
  }
  // Disjoint pieces on both sides of an empty centroid column.
  if (out.empty_foreground()) throw EmptySilhouette("no foreground inside the centroid-centred crop");
  return out;
}

}  // namespace

std::size_t BinaryMask::foreground() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

double centroid_x(const BinaryMask& mask) {
  const auto c = window_centroid(mask, 0, mask.width);
  if (!c) throw EmptySilhouette("centroid of empty mask");
  return *c;
}

SilhouetteFrame load_silhouette(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw LoadError("no such file: " + path.string());
  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw LoadError("cannot decode image: " + path.string());
  if (img.depth() != CV_8U) throw FormatError("expected 8-bit image: " + path.string());
  const int channels = img.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw FormatError("unsupported channel count in " + path.string());
  }
  SilhouetteFrame frame(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r) {
    const std::uint8_t* row = img.ptr<std::uint8_t>(r);
    for (int c = 0; c < img.cols; ++c) {
      const std::uint8_t* p = row + static_cast<std::size_t>(c) * channels;
      if (channels >= 3 && (p[0] != p[1] || p[1] != p[2])) {
        throw FormatError("multi-channel image with differing channels: " + path.string());
      }
      frame.at(r, c) = p[0] > 127 ? 1 : 0;
    }
  }
  return frame;
}

void save_silhouette(const BinaryMask& mask, const std::filesystem::path& path) {
  cv::Mat img(mask.height, mask.width, CV_8UC1);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) img.at<std::uint8_t>(r, c) = mask.at(r, c) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

NormalizedFrame normalize_silhouette(const SilhouetteFrame& frame,
                                     const NormalizeOptions& options) {
  if (options.target_h < 1 || options.target_w < 1) {
    throw ShapeError("normalization target must be positive");
  }
  constexpr int kMaxPasses = 8;
  BinaryMask current = normalize_once(frame, options);
  for (int pass = 1; pass < kMaxPasses; ++pass) {
    BinaryMask next = normalize_once(current, options);
    if (next == current) break;
    current = std::move(next);
  }
  return NormalizedFrame(std::move(current));
}

std::vector<NormalizedFrame> normalize_sequence(const std::vector<SilhouetteFrame>& frames,
                                                const NormalizeOptions& options) {
  std::vector<NormalizedFrame> out;
  out.reserve(frames.size());
  std::size_t dropped = 0;
  for (const auto& f : frames) {
    try {
      out.push_back(normalize_silhouette(f, options));
    } catch (const EmptySilhouette&) {
      ++dropped;
    }
  }
  if (out.empty()) throw EmptySequence("every frame in the sequence is empty");
  if (dropped > 0) spdlog::debug("dropped {} empty frame(s)", dropped);
  return out;
}

}  // namespace scogait
