#pragma once

#include <filesystem>
#include <vector>

#include "scogait/dataset.hpp"
#include "scogait/model.hpp"
#include "scogait/silhouette.hpp"

namespace scogait {

// Per-frame activation grids aligned to the input frames, scaled to [0, 1]
// by the maximum over the whole sequence.
struct HeatmapSequence {
  DiagnosticLabel target = DiagnosticLabel::kPositive;
  int height = 0;
  int width = 0;
  std::vector<std::vector<float>> frames;  // row-major height x width

  std::size_t size() const { return frames.size(); }
  float at(std::size_t t, int r, int c) const {
    return frames[t][static_cast<std::size_t>(r) * width + c];
  }
  float max() const;
};

// Gradient-weighted class activation at the last encoder stage. Channel
// weights average the target-logit gradient over frames and positions; each
// frame map is the rectified weighted channel sum, bilinearly upsampled.
// Runs the model in eval mode and leaves its gradients zeroed.
HeatmapSequence activation_map(ScoNet<float>& model, const std::vector<NormalizedFrame>& seq,
                               DiagnosticLabel target);
HeatmapSequence activation_map(const std::filesystem::path& checkpoint,
                               const std::vector<NormalizedFrame>& seq, DiagnosticLabel target);

struct OverlayOptions {
  double alpha = 0.6;  // heat opacity at activation 1
  int scale = 4;       // nearest-neighbour enlargement of the written images
};

// Writes frame_%06d_cam.png per frame plus average_cam.png. Returns the paths.
std::vector<std::filesystem::path> render_overlay(const std::vector<NormalizedFrame>& seq,
                                                  const HeatmapSequence& heatmaps,
                                                  const std::filesystem::path& out_dir,
                                                  const OverlayOptions& options = {});

}  // namespace scogait
