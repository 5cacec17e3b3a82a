#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace scogait {

// Row-major binary grid; every cell is 0 or 1.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
  std::size_t foreground() const;
  bool empty_foreground() const { return foreground() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// One raw per-frame observation.
using SilhouetteFrame = BinaryMask;

enum class Interpolation { kBilinear, kNearest };

struct NormalizeOptions {
  int target_h = 64;
  int target_w = 44;
  Interpolation interpolation = Interpolation::kBilinear;
};

// A body-centred crop of exactly target_h x target_w. Only produced by
// normalize_silhouette or adopted from an already-prepared file.
class NormalizedFrame {
 public:
  const BinaryMask& mask() const { return mask_; }
  int height() const { return mask_.height; }
  int width() const { return mask_.width; }

  // Wraps a mask that is already at the target size (prepared datasets).
  static NormalizedFrame adopt(BinaryMask mask) { return NormalizedFrame(std::move(mask)); }

  friend bool operator==(const NormalizedFrame&, const NormalizedFrame&) = default;

 private:
  explicit NormalizedFrame(BinaryMask mask) : mask_(std::move(mask)) {}
  friend NormalizedFrame normalize_silhouette(const SilhouetteFrame&, const NormalizeOptions&);
  BinaryMask mask_;
};

// Decodes an 8-bit image; values > 127 become foreground.
SilhouetteFrame load_silhouette(const std::filesystem::path& path);
void save_silhouette(const BinaryMask& mask, const std::filesystem::path& path);

// Tight crop, aspect-preserving rescale to target_h, centroid-centred
// crop/pad to target_w. The result is a fixed point of this function.
NormalizedFrame normalize_silhouette(const SilhouetteFrame& frame,
                                     const NormalizeOptions& options = {});

// Drops empty frames; throws EmptySequence if nothing survives.
std::vector<NormalizedFrame> normalize_sequence(const std::vector<SilhouetteFrame>& frames,
                                                const NormalizeOptions& options = {});

// Horizontal foreground centroid in continuous coordinates (column index + 0.5).
double centroid_x(const BinaryMask& mask);

}  // namespace scogait
