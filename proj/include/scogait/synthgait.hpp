#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scogait/dataset.hpp"
#include "scogait/keyvalue.hpp"
#include "scogait/silhouette.hpp"

namespace scogait {

inline constexpr int kCanvasSize = 128;

// Frontal stick-and-blob walker. Lengths are in canvas pixels, angles in
// degrees except the gait terms, which are radians.
struct WalkerParams {
  double torso_height = 38.0;
  double torso_width = 36.0;  // shoulder width
  double leg_length = 50.0;   // hip to ankle, two equal segments
  double arm_length = 40.0;   // shoulder to wrist, two equal segments
  double cadence = 0.42;      // gait phase advance per frame
  double stride_amplitude = 0.32;
  double shoulder_tilt = 0.0;  // positive raises the right shoulder
  double trunk_lean = 0.0;     // positive shifts the shoulders to the right
  double head_offset = 0.0;    // lateral head shift
  double noise_level = 0.0;
  double phase = 0.0;          // gait phase of frame 0
  std::uint64_t seed = 0;      // noise stream

  void validate() const;
};

// Keypoints of the figure at one gait phase, in canvas coordinates
// (x to the right, y down). Exposed for tests and diagnostics.
struct WalkerPose {
  double center_x = 0.0;
  double shoulder_center_x = 0.0;
  double shoulder_y = 0.0;
  double half_shoulder = 0.0;  // half-width of the shoulder line before tilt
  double head_x = 0.0;
  double head_y = 0.0;
  double head_rx = 0.0;
  double head_ry = 0.0;
};

WalkerPose walker_pose(const WalkerParams& params);

// 128x128 raw frames; frame t is rendered at phase params.phase + t * cadence.
std::vector<SilhouetteFrame> render_walker(const WalkerParams& params, int n_frames);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Magnitude ranges; each subject gets one random sign shared by all axes.
struct AsymmetryRanges {
  Interval shoulder_tilt;
  Interval trunk_lean;
  Interval head_offset;
};

struct SynthSpec {
  std::array<int, kNumClasses> subjects{10, 10, 80};  // positive, neutral, negative
  int frames_per_sequence = 60;
  int sequences_per_subject = 1;
  std::array<AsymmetryRanges, kNumClasses> asymmetry{
      AsymmetryRanges{{8.0, 15.0}, {3.0, 6.0}, {1.5, 3.0}},
      AsymmetryRanges{{4.0, 6.0}, {1.5, 3.0}, {0.5, 1.5}},
      AsymmetryRanges{{0.0, 2.0}, {0.0, 1.0}, {0.0, 0.5}}};
  double noise_level = 0.01;
  std::uint64_t seed = 0;
  bool normalize = true;  // write 64x44 prepared frames instead of raw canvases
  std::string subject_prefix = "syn";

  void validate() const;
  const AsymmetryRanges& ranges(DiagnosticLabel l) const { return asymmetry[index_of(l)]; }
};

KeyValues to_keyvalues(const SynthSpec& spec);
SynthSpec synth_spec_from(const KeyValues& kv);
SynthSpec read_synth_spec(const std::filesystem::path& file);

// Identity parameters of subject `index` (global across classes).
WalkerParams draw_subject(const SynthSpec& spec, DiagnosticLabel label, int index);
// Per-sequence variation on top of the subject: phase and noise seed only.
WalkerParams sequence_params(const WalkerParams& subject, const SynthSpec& spec, int index,
                             int sequence);

// Writes root/<label>/<subject>/<sequence>/frame_%06d.png, manifest.jsonl and
// synth_spec.ini. Records carry the drawn asymmetry as attributes.
Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_root);

}  // namespace scogait
