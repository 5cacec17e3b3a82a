#include "scogait/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "scogait/errors.hpp"
#include "scogait/random.hpp"

namespace scogait {

std::string to_string(DiagnosticLabel label) {
  switch (label) {
    case DiagnosticLabel::kPositive: return "positive";
    case DiagnosticLabel::kNeutral: return "neutral";
    case DiagnosticLabel::kNegative: return "negative";
  }
  return "?";
}

DiagnosticLabel parse_label(const std::string& s) {
  for (auto l : kAllLabels) {
    if (to_string(l) == s) return l;
  }
  throw FormatError("unknown diagnostic label '" + s + "'");
}

Manifest::Manifest(std::vector<SequenceRecord> records, fs::path root)
    : records_(std::move(records)), root_(std::move(root)) {
  std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.subject_id, a.sequence_id) < std::tie(b.subject_id, b.sequence_id);
  });
  std::map<std::string, DiagnosticLabel> subject_label;
  for (const auto& r : records_) {
    if (r.frame_paths.empty()) {
      throw FormatError("sequence " + r.key() + " has no frames");
    }
    auto [it, inserted] = subject_label.emplace(r.subject_id, r.label);
    if (!inserted && it->second != r.label) {
      throw ManifestConflict("subject '" + r.subject_id + "' appears under both " +
                             to_string(it->second) + " and " + to_string(r.label));
    }
  }
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].key() == records_[i - 1].key()) {
      throw ManifestConflict("duplicate sequence " + records_[i].key());
    }
  }
}

ClassCounts Manifest::counts() const {
  ClassCounts c{0, 0, 0};
  for (const auto& r : records_) ++c[index_of(r.label)];
  return c;
}

std::size_t Manifest::total_frames() const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.frame_paths.size();
  return n;
}

std::vector<std::string> Manifest::subjects() const {
  std::vector<std::string> ids;
  for (const auto& r : records_) {
    if (ids.empty() || ids.back() != r.subject_id) ids.push_back(r.subject_id);
  }
  return ids;  // records are sorted by subject first
}

const SequenceRecord* Manifest::find(const std::string& key) const {
  for (const auto& r : records_) {
    if (r.key() == key) return &r;
  }
  return nullptr;
}

namespace {

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Manifest build_manifest(const fs::path& root) {
  if (!fs::is_directory(root)) throw LoadError("dataset root is not a directory: " + root.string());
  std::vector<SequenceRecord> records;
  for (const auto& label_dir : sorted_children(root, true)) {
    const std::string name = label_dir.filename().string();
    DiagnosticLabel label;
    try {
      label = parse_label(name);
    } catch (const FormatError&) {
      throw FormatError("unexpected directory in dataset root (expected positive, neutral or "
                        "negative): " + label_dir.string());
    }
    for (const auto& subject_dir : sorted_children(label_dir, true)) {
      for (const auto& seq_dir : sorted_children(subject_dir, true)) {
        SequenceRecord rec;
        rec.subject_id = subject_dir.filename().string();
        rec.sequence_id = seq_dir.filename().string();
        rec.label = label;
        for (const auto& f : sorted_children(seq_dir, false)) {
          if (f.extension() == ".png") rec.frame_paths.push_back(fs::absolute(f));
        }
        if (rec.frame_paths.empty()) {
          spdlog::warn("skipping empty sequence directory {}", seq_dir.string());
          continue;
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return Manifest(std::move(records), fs::absolute(root));
}

void write_manifest_jsonl(const Manifest& manifest, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write manifest " + file.string());
  for (const auto& r : manifest.records()) {
    nlohmann::json j;
    j["subject_id"] = r.subject_id;
    j["sequence_id"] = r.sequence_id;
    j["label"] = to_string(r.label);
    j["n_frames"] = r.n_frames();
    std::vector<std::string> paths;
    for (const auto& p : r.frame_paths) {
      paths.push_back(manifest.root().empty() ? p.string()
                                              : fs::relative(p, manifest.root()).string());
    }
    j["paths"] = paths;
    if (!r.attributes.empty()) j["attributes"] = r.attributes;
    out << j.dump() << '\n';
  }
}

Manifest read_manifest_jsonl(const fs::path& file, const fs::path& root) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot read manifest " + file.string());
  std::vector<SequenceRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SequenceRecord r;
      r.subject_id = j.at("subject_id").get<std::string>();
      r.sequence_id = j.at("sequence_id").get<std::string>();
      r.label = parse_label(j.at("label").get<std::string>());
      for (const auto& p : j.at("paths")) r.frame_paths.push_back(root / p.get<std::string>());
      if (j.contains("attributes")) {
        r.attributes = j["attributes"].get<std::map<std::string, std::string>>();
      }
      if (j.at("n_frames").get<int>() != r.n_frames()) {
        throw FormatError("n_frames does not match the path list");
      }
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Manifest(std::move(records), root);
}

std::string ClassRatio::str() const {
  return std::to_string(positive) + ":" + std::to_string(neutral) + ":" + std::to_string(negative);
}

ClassRatio parse_ratio(const std::string& s) {
  std::array<int, 3> v{};
  std::stringstream ss(s);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ':')) {
    if (i >= 3) throw ConfigError({"ratio '" + s + "' must have three components"});
    try {
      std::size_t used = 0;
      v[i] = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError({"ratio '" + s + "' has a non-integer component"});
    }
    if (v[i] < 1) throw ConfigError({"ratio '" + s + "' components must be >= 1"});
    ++i;
  }
  if (i != 3) throw ConfigError({"ratio '" + s + "' must have three components"});
  return ClassRatio{v[0], v[1], v[2]};
}

namespace {

std::vector<std::string> read_list(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw SplitError("cannot read split list " + file.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

// Lines name either "subject/sequence" or a bare sequence id.
std::set<std::size_t> resolve_list(const Manifest& m, const fs::path& file) {
  std::set<std::size_t> chosen;
  const auto& recs = m.records();
  for (const auto& entry : read_list(file)) {
    bool found = false;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const bool match = entry.find('/') != std::string::npos ? recs[i].key() == entry
                                                               : recs[i].sequence_id == entry;
      if (match) {
        chosen.insert(i);
        found = true;
      }
    }
    if (!found) throw SplitError(file.string() + " references unknown sequence '" + entry + "'");
  }
  return chosen;
}

}  // namespace

std::pair<Manifest, Manifest> split_train_test(const Manifest& manifest, const SplitSpec& spec) {
  std::vector<SequenceRecord> train, test;
  const auto& recs = manifest.records();
  if (spec.mode == SplitMode::kSequenceList) {
    const auto train_idx = resolve_list(manifest, spec.train_list);
    const auto test_idx = resolve_list(manifest, spec.test_list);
    for (std::size_t i : train_idx) {
      if (test_idx.count(i)) throw SplitError("sequence " + recs[i].key() + " is in both lists");
      train.push_back(recs[i]);
    }
    for (std::size_t i : test_idx) test.push_back(recs[i]);
    const std::size_t unused = recs.size() - train_idx.size() - test_idx.size();
    if (unused > 0) spdlog::warn("{} sequence(s) appear in neither split list", unused);
  } else {
    if (spec.test_fraction < 0.0 || spec.test_fraction >= 1.0) {
      throw SplitError("test_fraction must lie in [0, 1)");
    }
    // Stratified by label so both sides keep every class.
    std::set<std::string> test_subjects;
    for (auto label : kAllLabels) {
      std::vector<std::string> subjects;
      for (const auto& r : recs) {
        if (r.label == label && (subjects.empty() || subjects.back() != r.subject_id)) {
          subjects.push_back(r.subject_id);
        }
      }
      Rng rng(derive_seed(spec.seed, {0x5b17, static_cast<std::uint64_t>(index_of(label))}));
      rng.shuffle(std::span<std::string>(subjects));
      const auto n_test = static_cast<std::size_t>(subjects.size() * spec.test_fraction);
      test_subjects.insert(subjects.begin(), subjects.begin() + static_cast<long>(n_test));
    }
    for (const auto& r : recs) (test_subjects.count(r.subject_id) ? test : train).push_back(r);
  }
  if (test.empty()) spdlog::warn("split produced an empty test set");
  if (train.empty()) spdlog::warn("split produced an empty training set");
  Manifest train_m(std::move(train), manifest.root());
  Manifest test_m(std::move(test), manifest.root());
  if (spec.ratio) train_m = subsample_ratio(train_m, *spec.ratio, spec.seed, spec.ratio_total);
  return {std::move(train_m), std::move(test_m)};
}

ClassCounts ratio_counts(const ClassRatio& ratio, int total) {
  int major = 0;
  for (int i = 1; i < kNumClasses; ++i) {
    if (ratio.at(i) >= ratio.at(major)) major = i;
  }
  const long sum = ratio.sum();
  ClassCounts c{};
  for (int i = 0; i < kNumClasses; ++i) {
    const long num = static_cast<long>(total) * ratio.at(i);
    c[i] = static_cast<int>(i == major ? (num + sum - 1) / sum : num / sum);
  }
  return c;
}

Manifest subsample_ratio(const Manifest& train, const ClassRatio& ratio, std::uint64_t seed,
                         int total) {
  if (ratio.positive < 1 || ratio.neutral < 1 || ratio.negative < 1) {
    throw RatioError("ratio components must be >= 1");
  }
  const ClassCounts available = train.counts();
  for (int i = 0; i < kNumClasses; ++i) {
    if (available[i] == 0) {
      throw RatioError("no " + to_string(label_from_index(i)) + " sequences to sample from");
    }
  }
  int t = total > 0 ? total : static_cast<int>(train.size());
  ClassCounts want = ratio_counts(ratio, t);
  auto fits = [&](const ClassCounts& c) {
    for (int i = 0; i < kNumClasses; ++i) {
      if (c[i] > available[i]) return false;
    }
    return true;
  };
  while (t > 0 && !fits(want)) want = ratio_counts(ratio, --t);
  for (int i = 0; i < kNumClasses; ++i) {
    if (want[i] < 1) throw RatioError("ratio " + ratio.str() + " is infeasible for this pool");
  }
  if (t != (total > 0 ? total : static_cast<int>(train.size()))) {
    spdlog::info("ratio {}: pool limits the subset to {} sequences", ratio.str(), t);
  }

  std::vector<SequenceRecord> kept;
  for (int i = 0; i < kNumClasses; ++i) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < train.size(); ++k) {
      if (index_of(train.records()[k].label) == i) idx.push_back(k);
    }
    Rng rng(derive_seed(seed, {0x7a71, static_cast<std::uint64_t>(i)}));
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(static_cast<std::size_t>(want[i]));
    for (std::size_t k : idx) kept.push_back(train.records()[k]);
  }
  spdlog::info("ratio {} -> counts {}:{}:{}", ratio.str(), want[0], want[1], want[2]);
  return Manifest(std::move(kept), train.root());
}

std::vector<int> sample_frames(int n_frames, int n, std::uint64_t seed) {
  if (n < 1) throw SamplerError("frame count must be >= 1");
  if (n_frames < 1) throw SamplerError("sequence has no frames");
  Rng rng(seed);
  std::vector<int> out;
  if (n_frames >= n) {
    std::vector<int> all(static_cast<std::size_t>(n_frames));
    std::iota(all.begin(), all.end(), 0);
    // Partial Fisher-Yates: the first n slots are a uniform n-subset.
    for (int i = 0; i < n; ++i) {
      const std::size_t j = i + rng.index(static_cast<std::size_t>(n_frames - i));
      std::swap(all[i], all[j]);
    }
    out.assign(all.begin(), all.begin() + n);
  } else {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(rng.index(n_frames)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string Batch::describe(const Manifest& manifest) const {
  std::string s;
  for (const auto& v : views) {
    const auto& r = manifest.records()[v.record_index];
    s += r.key() + " [" + to_string(v.label) + "] frames";
    for (int f : v.frames) s += " " + std::to_string(f);
    s += "\n";
  }
  return s;
}

Batch make_batch(const Manifest& train, int P, int K, int n, std::uint64_t seed) {
  if (K < 2) throw SamplerError("K must be >= 2");
  if (n < 1) throw SamplerError("frame count must be >= 1");
  const auto subjects = train.subjects();
  if (P < 1 || static_cast<std::size_t>(P) > subjects.size()) {
    throw SamplerError("P=" + std::to_string(P) + " exceeds the " +
                       std::to_string(subjects.size()) + " available subjects");
  }
  // Record index ranges per subject (records are sorted by subject).
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (i == 0 || train.records()[i].subject_id != train.records()[i - 1].subject_id) {
      ranges.emplace_back(i, i);
    }
    ranges.back().second = i + 1;
  }

  Rng rng(seed);
  std::vector<std::size_t> order(subjects.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < P; ++i) {
    std::swap(order[i], order[i + rng.index(order.size() - i)]);
  }

  Batch batch;
  for (int i = 0; i < P; ++i) {
    const std::size_t subject = order[i];
    const auto [lo, hi] = ranges[subject];
    const std::size_t rec_index = lo + rng.index(hi - lo);
    const auto& rec = train.records()[rec_index];
    const int total = rec.n_frames();
    std::vector<int> perm(static_cast<std::size_t>(total));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    for (int k = 0; k < K; ++k) {
      BatchView view;
      view.record_index = rec_index;
      view.identity = static_cast<int>(subject);
      view.label = rec.label;
      if (total >= K * n) {
        view.frames.assign(perm.begin() + k * n, perm.begin() + (k + 1) * n);
      } else {
        // Best effort: each view draws from its own chunk of the permutation.
        const int begin = total * k / K, end = total * (k + 1) / K;
        std::vector<int> chunk(perm.begin() + begin, perm.begin() + end);
        if (chunk.empty()) chunk = perm;
        if (static_cast<int>(chunk.size()) >= n) {
          view.frames.assign(chunk.begin(), chunk.begin() + n);
        } else {
          for (int j = 0; j < n; ++j) view.frames.push_back(chunk[rng.index(chunk.size())]);
        }
      }
      std::sort(view.frames.begin(), view.frames.end());
      batch.views.push_back(std::move(view));
    }
  }
  return batch;
}

const std::vector<NormalizedFrame>& FrameStore::frames(const SequenceRecord& record) {
  const std::string key = record.key();
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  std::vector<NormalizedFrame> frames;
  frames.reserve(record.frame_paths.size());
  for (const auto& p : record.frame_paths) {
    SilhouetteFrame f = load_silhouette(p);
    if (f.empty_foreground()) continue;
    if (f.height == options_.target_h && f.width == options_.target_w) {
      frames.push_back(NormalizedFrame::adopt(std::move(f)));
    } else {
      try {
        frames.push_back(normalize_silhouette(f, options_));
      } catch (const EmptySilhouette&) {
        // foreground vanished while rescaling; drop like an empty frame
      }
    }
  }
  if (frames.empty()) throw EmptySequence("sequence " + key + " has no usable frames");
  std::lock_guard lock(mutex_);
  return cache_.emplace(key, std::move(frames)).first->second;
}

}  // namespace scogait
