#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scogait/silhouette.hpp"

namespace scogait {

namespace fs = std::filesystem;

// Fixed integer encoding used for logits and confusion matrices.
enum class DiagnosticLabel : int { kPositive = 0, kNeutral = 1, kNegative = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<DiagnosticLabel, kNumClasses> kAllLabels = {
    DiagnosticLabel::kPositive, DiagnosticLabel::kNeutral, DiagnosticLabel::kNegative};

std::string to_string(DiagnosticLabel label);
DiagnosticLabel parse_label(const std::string& s);
inline int index_of(DiagnosticLabel l) { return static_cast<int>(l); }
inline DiagnosticLabel label_from_index(int i) { return static_cast<DiagnosticLabel>(i); }

struct SequenceRecord {
  std::string subject_id;
  std::string sequence_id;
  DiagnosticLabel label = DiagnosticLabel::kNegative;
  std::vector<fs::path> frame_paths;  // absolute, in frame order
  // Optional per-subject metadata (age, sex, ...). Carried through, unused.
  std::map<std::string, std::string> attributes;

  int n_frames() const { return static_cast<int>(frame_paths.size()); }
  std::string key() const { return subject_id + "/" + sequence_id; }
};

using ClassCounts = std::array<int, kNumClasses>;

// Immutable list of sequences; every subject carries exactly one label.
class Manifest {
 public:
  Manifest() = default;
  // Sorts records by (subject, sequence) and validates label consistency.
  explicit Manifest(std::vector<SequenceRecord> records, fs::path root = {});

  const std::vector<SequenceRecord>& records() const { return records_; }
  const fs::path& root() const { return root_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  ClassCounts counts() const;
  std::size_t total_frames() const;
  // Sorted unique subject ids.
  std::vector<std::string> subjects() const;
  const SequenceRecord* find(const std::string& key) const;

 private:
  std::vector<SequenceRecord> records_;
  fs::path root_;
};

// Scans root/<label>/<subject>/<sequence>/<frame>.png.
Manifest build_manifest(const fs::path& root);

// JSON-lines cache, one record per line with paths relative to the root.
void write_manifest_jsonl(const Manifest& manifest, const fs::path& file);
Manifest read_manifest_jsonl(const fs::path& file, const fs::path& root);

// Positive:neutral:negative sequence ratio.
struct ClassRatio {
  int positive = 1;
  int neutral = 1;
  int negative = 8;

  int at(int i) const { return i == 0 ? positive : (i == 1 ? neutral : negative); }
  int sum() const { return positive + neutral + negative; }
  std::string str() const;
};

ClassRatio parse_ratio(const std::string& s);

enum class SplitMode { kSubjectDisjoint, kSequenceList };

struct SplitSpec {
  SplitMode mode = SplitMode::kSubjectDisjoint;
  std::uint64_t seed = 0;
  double test_fraction = 0.5;
  fs::path train_list;  // sequence_list mode
  fs::path test_list;
  std::optional<ClassRatio> ratio;  // applied to the training side
  int ratio_total = 0;              // 0: size of the training side
};

std::pair<Manifest, Manifest> split_train_test(const Manifest& manifest, const SplitSpec& spec);

// Target per-class counts for `total` sequences: the class with the largest
// ratio share is rounded up, the others down.
ClassCounts ratio_counts(const ClassRatio& ratio, int total);

// Subsamples sequences per class to match `ratio`, shrinking the total until
// every class fits its pool. `total` of 0 means the size of `train`.
Manifest subsample_ratio(const Manifest& train, const ClassRatio& ratio, std::uint64_t seed,
                         int total = 0);

// n ascending frame indices; without replacement when n_frames >= n.
std::vector<int> sample_frames(int n_frames, int n, std::uint64_t seed);

struct BatchView {
  std::size_t record_index = 0;
  int identity = 0;  // subject index within the manifest's subjects()
  DiagnosticLabel label = DiagnosticLabel::kNegative;
  std::vector<int> frames;
};

struct Batch {
  std::vector<BatchView> views;
  std::string describe(const Manifest& manifest) const;
};

// P subjects x K views of n frames. Views of one subject come from the same
// sequence and use disjoint frames whenever n_frames >= K * n.
Batch make_batch(const Manifest& train, int P, int K, int n, std::uint64_t seed);

// Loads (and normalizes when needed) the frames of a sequence once, then
// serves them from memory.
class FrameStore {
 public:
  explicit FrameStore(NormalizeOptions options = {}) : options_(options) {}

  const std::vector<NormalizedFrame>& frames(const SequenceRecord& record);

 private:
  NormalizeOptions options_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::vector<NormalizedFrame>> cache_;
};

}  // namespace scogait
