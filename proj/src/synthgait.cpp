#include "scogait/synthgait.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <spdlog/spdlog.h>

#include "scogait/errors.hpp"
#include "scogait/random.hpp"

namespace scogait {

namespace {

constexpr double kGround = 124.0;
constexpr double kCenter = kCanvasSize / 2.0;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

// Figure-space point: u is the horizontal offset from the canvas centre.
struct Pt {
  double u;
  double y;
};

struct Ellipse {
  Pt c;
  double rx, ry;
};

struct Capsule {
  Pt a, b;
  double r;
};

struct Quad {
  std::array<Pt, 4> p;  // convex, any winding
};

struct Box {
  double u0, u1, y0, y1;
};

bool inside(const Ellipse& e, double u, double y) {
  const double du = (u - e.c.u) / e.rx;
  const double dy = (y - e.c.y) / e.ry;
  return du * du + dy * dy <= 1.0;
}

bool inside(const Capsule& c, double u, double y) {
  const double bu = c.b.u - c.a.u;
  const double by = c.b.y - c.a.y;
  const double pu = u - c.a.u;
  const double py = y - c.a.y;
  const double len2 = bu * bu + by * by;
  double t = len2 > 0 ? (pu * bu + py * by) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double du = pu - t * bu;
  const double dy = py - t * by;
  return du * du + dy * dy <= c.r * c.r;
}

bool inside(const Quad& q, double u, double y) {
  bool any_pos = false;
  bool any_neg = false;
  for (int i = 0; i < 4; ++i) {
    const Pt& a = q.p[i];
    const Pt& b = q.p[(i + 1) % 4];
    const double cross = (b.u - a.u) * (y - a.y) - (b.y - a.y) * (u - a.u);
    if (cross > 0) any_pos = true;
    if (cross < 0) any_neg = true;
  }
  return !(any_pos && any_neg);
}

Box bounds(const Ellipse& e) { return {e.c.u - e.rx, e.c.u + e.rx, e.c.y - e.ry, e.c.y + e.ry}; }
Box bounds(const Capsule& c) {
  return {std::min(c.a.u, c.b.u) - c.r, std::max(c.a.u, c.b.u) + c.r,
          std::min(c.a.y, c.b.y) - c.r, std::max(c.a.y, c.b.y) + c.r};
}
Box bounds(const Quad& q) {
  Box b{q.p[0].u, q.p[0].u, q.p[0].y, q.p[0].y};
  for (const auto& p : q.p) {
    b.u0 = std::min(b.u0, p.u);
    b.u1 = std::max(b.u1, p.u);
    b.y0 = std::min(b.y0, p.y);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

template <typename Shape>
void paint(BinaryMask& m, const Shape& s) {
  const Box b = bounds(s);
  const int c0 = std::max(0, static_cast<int>(std::floor(b.u0 + kCenter - 0.5)));
  const int c1 = std::min(m.width - 1, static_cast<int>(std::ceil(b.u1 + kCenter - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::floor(b.y0 - 0.5)));
  const int r1 = std::min(m.height - 1, static_cast<int>(std::ceil(b.y1 - 0.5)));
  for (int r = r0; r <= r1; ++r) {
    const double y = r + 0.5;
    for (int c = c0; c <= c1; ++c) {
      if (m.at(r, c)) continue;
      // Pixel centres sit at half-integers, so u is exact and mirrors exactly.
      const double u = c + 0.5 - kCenter;
      if (inside(s, u, y)) m.at(r, c) = 1;
    }
  }
}

Pt along(Pt from, double length, double angle) {
  return {from.u + length * std::sin(angle), from.y + length * std::cos(angle)};
}

void render_pose(BinaryMask& m, const WalkerParams& p, double phase) {
  double s = std::sin(phase);
  if (std::abs(s) < 1e-9) s = 0.0;

  const WalkerPose pose = walker_pose(p);
  const double w = p.torso_width;
  const double tilt = radians(p.shoulder_tilt);
  const double hip_y = kGround - p.leg_length;
  const double sh_u = pose.shoulder_center_x - kCenter;
  const double sh_y = pose.shoulder_y;
  const double half = pose.half_shoulder;

  const Pt right_sh{sh_u + half * std::cos(tilt), sh_y - half * std::sin(tilt)};
  const Pt left_sh{sh_u - half * std::cos(tilt), sh_y + half * std::sin(tilt)};
  const double hip_half = 0.38 * w;
  paint(m, Quad{{Pt{-hip_half, hip_y}, Pt{hip_half, hip_y}, right_sh, left_sh}});

  const Ellipse head{{pose.head_x - kCenter, pose.head_y}, pose.head_rx, pose.head_ry};
  paint(m, head);
  paint(m, Capsule{{sh_u, sh_y}, head.c, 0.45 * head.rx});

  const double leg_r = 0.09 * w;
  const double arm_r = 0.07 * w;
  const double seg_leg = p.leg_length / 2.0;
  const double seg_arm = p.arm_length / 2.0;
  const double amp = p.stride_amplitude;
  // Frontal view: the swing leg lifts its knee, which shows up as a
  // foreshortened shin and a slight outward swing; arms counter-swing.
  for (int side : {-1, 1}) {
    const double lift = side < 0 ? std::max(0.0, s) : std::max(0.0, -s);
    const double other = side < 0 ? std::max(0.0, -s) : std::max(0.0, s);

    const Pt hip{side * (hip_half - leg_r), hip_y};
    const double thigh_angle = side * (0.03 + 0.3 * amp * lift);
    const Pt knee = along(hip, seg_leg, thigh_angle);
    const Pt ankle = along(knee, seg_leg * (1.0 - amp * lift), side * 0.02);
    paint(m, Capsule{hip, knee, leg_r});
    paint(m, Capsule{knee, ankle, leg_r});

    const Pt& corner = side < 0 ? left_sh : right_sh;
    const Pt shoulder{corner.u + side * arm_r, corner.y + arm_r};
    const Pt elbow = along(shoulder, seg_arm, side * (0.05 + 0.25 * amp * other));
    const Pt wrist = along(elbow, seg_arm * (1.0 - 0.8 * amp * other), side * 0.02);
    paint(m, Capsule{shoulder, elbow, arm_r});
    paint(m, Capsule{elbow, wrist, arm_r});
  }
}

void add_salt(BinaryMask& m, double level, Rng& rng) {
  int r0 = m.height, r1 = -1, c0 = m.width, c1 = -1;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  // Salt is confined to the figure's bounding box; stray pixels elsewhere
  // would hijack the bounding-box crop during normalization.
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (rng.bernoulli(level)) m.at(r, c) = 1;
    }
  }
}

void check_interval(std::vector<std::string>& problems, const std::string& what, Interval iv,
                    double limit) {
  if (!(iv.lo >= 0.0 && iv.hi >= iv.lo)) {
    problems.push_back(what + ": need 0 <= lo <= hi");
  } else if (iv.hi > limit) {
    problems.push_back(what + ": exceeds " + format_double(limit));
  }
}

std::string interval_string(Interval iv) {
  return format_double(iv.lo) + "," + format_double(iv.hi);
}

}  // namespace

void WalkerParams::validate() const {
  std::vector<std::string> problems;
  if (!(torso_height > 0 && torso_width > 0 && leg_length > 0 && arm_length > 0)) {
    problems.push_back("walker lengths must be positive");
  }
  if (!(stride_amplitude >= 0)) problems.push_back("stride_amplitude must be non-negative");
  if (!(noise_level >= 0 && noise_level <= 0.05)) {
    problems.push_back("noise_level must lie in [0, 0.05]");
  }
  if (!(std::abs(shoulder_tilt) <= 20)) problems.push_back("|shoulder_tilt| must be <= 20");
  if (!(std::abs(trunk_lean) <= 15)) problems.push_back("|trunk_lean| must be <= 15");
  if (!std::isfinite(cadence) || !std::isfinite(phase) || !std::isfinite(head_offset)) {
    problems.push_back("walker parameters must be finite");
  }
  if (!problems.empty()) throw ConfigError(problems);
}

WalkerPose walker_pose(const WalkerParams& p) {
  WalkerPose pose;
  pose.center_x = kCenter;
  const double hip_y = kGround - p.leg_length;
  pose.shoulder_y = hip_y - p.torso_height;
  pose.shoulder_center_x = kCenter + p.torso_height * std::tan(radians(p.trunk_lean));
  pose.half_shoulder = p.torso_width / 2.0;
  pose.head_rx = 0.2 * p.torso_width;
  pose.head_ry = 1.2 * pose.head_rx;
  pose.head_x = pose.shoulder_center_x + p.head_offset;
  pose.head_y = pose.shoulder_y - 0.06 * p.torso_height - pose.head_ry;
  return pose;
}

std::vector<SilhouetteFrame> render_walker(const WalkerParams& params, int n_frames) {
  params.validate();
  if (n_frames < 1) throw ConfigError({"render_walker needs at least one frame"});
  std::vector<SilhouetteFrame> frames;
  frames.reserve(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    SilhouetteFrame m(kCanvasSize, kCanvasSize);
    render_pose(m, params, params.phase + params.cadence * t);
    if (params.noise_level > 0) {
      Rng rng(derive_seed(params.seed, {static_cast<std::uint64_t>(t)}));
      add_salt(m, params.noise_level, rng);
    }
    frames.push_back(std::move(m));
  }
  return frames;
}

void SynthSpec::validate() const {
  std::vector<std::string> problems;
  for (int s : subjects) {
    if (s < 0) problems.push_back("subject counts must be non-negative");
  }
  if (frames_per_sequence < 1) problems.push_back("frames_per_sequence must be >= 1");
  if (sequences_per_subject < 1) problems.push_back("sequences_per_subject must be >= 1");
  if (!(noise_level >= 0 && noise_level <= 0.05)) {
    problems.push_back("noise_level must lie in [0, 0.05]");
  }
  if (subject_prefix.empty() || subject_prefix.find('/') != std::string::npos) {
    problems.push_back("subject_prefix must be a non-empty path component");
  }
  for (auto l : kAllLabels) {
    const auto& r = ranges(l);
    check_interval(problems, to_string(l) + ".shoulder_tilt", r.shoulder_tilt, 20.0);
    check_interval(problems, to_string(l) + ".trunk_lean", r.trunk_lean, 15.0);
    check_interval(problems, to_string(l) + ".head_offset", r.head_offset, 8.0);
  }
  for (int a = 0; a < kNumClasses; ++a) {
    for (int b = a + 1; b < kNumClasses; ++b) {
      const Interval x = asymmetry[a].shoulder_tilt;
      const Interval y = asymmetry[b].shoulder_tilt;
      if (x.lo <= y.hi && y.lo <= x.hi) {
        problems.push_back("shoulder_tilt ranges of " + to_string(label_from_index(a)) + " and " +
                           to_string(label_from_index(b)) + " overlap");
      }
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
}

KeyValues to_keyvalues(const SynthSpec& spec) {
  KeyValues kv;
  kv["synth.subjects"] = join_list(std::vector<int>(spec.subjects.begin(), spec.subjects.end()));
  kv["synth.frames_per_sequence"] = std::to_string(spec.frames_per_sequence);
  kv["synth.sequences_per_subject"] = std::to_string(spec.sequences_per_subject);
  kv["synth.noise_level"] = format_double(spec.noise_level);
  kv["synth.seed"] = std::to_string(spec.seed);
  kv["synth.normalize"] = spec.normalize ? "true" : "false";
  kv["synth.subject_prefix"] = spec.subject_prefix;
  for (auto l : kAllLabels) {
    const std::string base = "synth." + to_string(l) + "_";
    const auto& r = spec.ranges(l);
    kv[base + "shoulder_tilt"] = interval_string(r.shoulder_tilt);
    kv[base + "trunk_lean"] = interval_string(r.trunk_lean);
    kv[base + "head_offset"] = interval_string(r.head_offset);
  }
  return kv;
}

SynthSpec synth_spec_from(const KeyValues& kv) {
  SynthSpec spec;
  KeyValueReader reader(kv);
  std::vector<int> subjects(spec.subjects.begin(), spec.subjects.end());
  reader.get("synth.subjects", subjects);
  if (subjects.size() == kNumClasses) {
    std::copy(subjects.begin(), subjects.end(), spec.subjects.begin());
  } else {
    reader.problem("synth.subjects: expected three counts (positive,neutral,negative)");
  }
  reader.get("synth.frames_per_sequence", spec.frames_per_sequence);
  reader.get("synth.sequences_per_subject", spec.sequences_per_subject);
  reader.get("synth.noise_level", spec.noise_level);
  reader.get("synth.seed", spec.seed);
  reader.get("synth.normalize", spec.normalize);
  reader.get("synth.subject_prefix", spec.subject_prefix);
  for (auto l : kAllLabels) {
    auto& r = spec.asymmetry[index_of(l)];
    const std::string base = "synth." + to_string(l) + "_";
    for (auto [name, iv] : {std::pair{"shoulder_tilt", &r.shoulder_tilt},
                            std::pair{"trunk_lean", &r.trunk_lean},
                            std::pair{"head_offset", &r.head_offset}}) {
      std::vector<double> v{iv->lo, iv->hi};
      reader.get(base + name, v);
      if (v.size() != 2) {
        reader.problem(base + name + ": expected 'lo,hi'");
      } else {
        *iv = {v[0], v[1]};
      }
    }
  }
  auto problems = reader.problems();
  if (!problems.empty()) throw ConfigError(problems);
  spec.validate();
  return spec;
}

SynthSpec read_synth_spec(const std::filesystem::path& file) {
  return synth_spec_from(read_keyvalues(file));
}

WalkerParams draw_subject(const SynthSpec& spec, DiagnosticLabel label, int index) {
  Rng rng(derive_seed(spec.seed, {0x5b1ec7ULL, static_cast<std::uint64_t>(index)}));
  WalkerParams p;
  p.torso_height = rng.uniform(34.0, 40.0);
  p.torso_width = rng.uniform(34.0, 40.0);
  p.leg_length = rng.uniform(46.0, 54.0);
  p.arm_length = rng.uniform(36.0, 44.0);
  p.cadence = rng.uniform(0.35, 0.50);
  p.stride_amplitude = rng.uniform(0.22, 0.38);
  const auto& r = spec.ranges(label);
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  p.shoulder_tilt = sign * rng.uniform(r.shoulder_tilt.lo, r.shoulder_tilt.hi);
  p.trunk_lean = sign * rng.uniform(r.trunk_lean.lo, r.trunk_lean.hi);
  p.head_offset = sign * rng.uniform(r.head_offset.lo, r.head_offset.hi);
  p.noise_level = spec.noise_level;
  return p;
}

WalkerParams sequence_params(const WalkerParams& subject, const SynthSpec& spec, int index,
                             int sequence) {
  Rng rng(derive_seed(spec.seed, {0x5e90ULL, static_cast<std::uint64_t>(index),
                                  static_cast<std::uint64_t>(sequence)}));
  WalkerParams p = subject;
  p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.seed = rng.next();
  return p;
}

Manifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_root) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_root, ec);
  if (ec) throw IoError("cannot create " + out_root.string() + ": " + ec.message());

  const NormalizeOptions norm;
  std::vector<SequenceRecord> records;
  int index = 0;
  for (auto label : kAllLabels) {
    for (int i = 0; i < spec.subjects[index_of(label)]; ++i, ++index) {
      char subject[64];
      std::snprintf(subject, sizeof subject, "%s%05d", spec.subject_prefix.c_str(), index);
      const WalkerParams base = draw_subject(spec, label, index);
      for (int q = 0; q < spec.sequences_per_subject; ++q) {
        const WalkerParams params = sequence_params(base, spec, index, q);
        char seq[32];
        std::snprintf(seq, sizeof seq, "seq%02d", q);
        const auto dir = out_root / to_string(label) / subject / seq;

        SequenceRecord rec;
        rec.subject_id = subject;
        rec.sequence_id = seq;
        rec.label = label;
        rec.attributes = {{"shoulder_tilt", format_double(params.shoulder_tilt)},
                          {"trunk_lean", format_double(params.trunk_lean)},
                          {"head_offset", format_double(params.head_offset)},
                          {"phase", format_double(params.phase)}};
        const auto raw = render_walker(params, spec.frames_per_sequence);
        for (int t = 0; t < spec.frames_per_sequence; ++t) {
          char name[32];
          std::snprintf(name, sizeof name, "frame_%06d.png", t);
          const auto path = dir / name;
          if (spec.normalize) {
            save_silhouette(normalize_silhouette(raw[t], norm).mask(), path);
          } else {
            save_silhouette(raw[t], path);
          }
          rec.frame_paths.push_back(std::filesystem::absolute(path));
        }
        records.push_back(std::move(rec));
      }
    }
  }
  Manifest manifest(std::move(records), out_root);
  write_manifest_jsonl(manifest, out_root / "manifest.jsonl");
  write_keyvalues(to_keyvalues(spec), out_root / "synth_spec.ini");
  spdlog::info("synthesized {} sequences under {}", manifest.size(), out_root.string());
  return manifest;
}

}  // namespace scogait
