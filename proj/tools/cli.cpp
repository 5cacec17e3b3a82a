#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "scogait/checkpoint.hpp"
#include "scogait/config.hpp"
#include "scogait/errors.hpp"
#include "scogait/explain.hpp"
#include "scogait/synthgait.hpp"
#include "scogait/train_eval.hpp"

namespace scogait {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string tag;
  std::string checkpoint;
};

struct Positional {
  std::string raw_root;
  std::string out_root;
  std::vector<std::string> sequences;
};

void add_common(CLI::App* cmd, Common& c, bool wants_checkpoint) {
  cmd->add_option("--config", c.config, "key-value config file");
  cmd->add_option("--set", c.sets, "override, key=value (repeatable)")->allow_extra_args(false);
  cmd->add_option("--out", c.out, "output root (default: run.out, then $SCOGAIT_OUT, then runs)");
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--tag", c.tag, "run directory name (default: timestamp)");
  if (wants_checkpoint) cmd->add_option("--checkpoint", c.checkpoint, "model checkpoint");
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

RunConfig resolve(const std::string& command, const Common& c) {
  KeyValues kv;
  if (!c.config.empty()) kv = read_keyvalues(c.config);
  apply_overrides(kv, c.sets);
  if (!c.out.empty()) {
    kv["run.out"] = c.out;
  } else if (!kv.count("run.out")) {
    if (const char* env = std::getenv("SCOGAIT_OUT"); env && *env) kv["run.out"] = env;
  }
  if (c.seed) {
    kv["run.seed"] = std::to_string(*c.seed);
    if (command == "synth") kv["synth.seed"] = std::to_string(*c.seed);
  }
  if (!c.tag.empty()) kv["run.tag"] = c.tag;
  if (!c.checkpoint.empty()) kv["run.checkpoint"] = c.checkpoint;
  auto rc = run_config_from(kv);
  if (rc.tag.empty()) rc.tag = timestamp();
  return rc;
}

fs::path prepare_run_dir(const std::string& command, const RunConfig& rc) {
  const fs::path dir = rc.out / command / rc.tag;
  fs::create_directories(dir);
  write_keyvalues(to_keyvalues(rc), dir / "resolved_config.ini");
  return dir;
}

Manifest load_dataset(const fs::path& root) {
  if (root.empty()) throw ConfigError({"data.root is required for this command"});
  const fs::path cache = root / "manifest.jsonl";
  if (fs::exists(cache)) return read_manifest_jsonl(cache, root);
  return build_manifest(root);
}

void print_counts(std::ostream& out, const std::string& what, const Manifest& m) {
  const auto c = m.counts();
  out << what << ": positive " << c[0] << ", neutral " << c[1] << ", negative " << c[2]
      << " (" << m.size() << " sequences, " << m.subjects().size() << " subjects)\n";
}

void write_list(const Manifest& m, const fs::path& file) {
  std::ofstream out(file);
  for (const auto& r : m.records()) out << r.key() << "\n";
  if (!out) throw IoError("cannot write " + file.string());
}

// Train and test sides per the data and split settings. `apply_ratio` is
// false for ratio studies, which subsample per ratio themselves.
std::pair<Manifest, Manifest> datasets(const RunConfig& rc, bool apply_ratio) {
  SplitSpec spec = rc.split;
  if (!apply_ratio) spec.ratio.reset();
  const Manifest all = load_dataset(rc.data.root);
  if (rc.data.test_root.empty()) return split_train_test(all, spec);
  Manifest train_side = all;
  if (spec.ratio) train_side = subsample_ratio(all, *spec.ratio, spec.seed, spec.ratio_total);
  return {train_side, load_dataset(rc.data.test_root)};
}

ScoNet<float> load_model(const RunConfig& rc) {
  if (rc.checkpoint.empty()) throw ConfigError({"a checkpoint is required (--checkpoint)"});
  return load_checkpoint<float>(rc.checkpoint);
}

int cmd_prepare(const Positional& pos, std::ostream& out) {
  const fs::path raw = pos.raw_root, dst = pos.out_root;
  const Manifest m = build_manifest(raw);
  print_counts(out, "raw", m);
  long written = 0, dropped = 0;
  for (const auto& rec : m.records()) {
    const fs::path dir = dst / to_string(rec.label) / rec.subject_id / rec.sequence_id;
    fs::create_directories(dir);
    long kept = 0;
    for (const auto& f : rec.frame_paths) {
      try {
        save_silhouette(normalize_silhouette(load_silhouette(f), {}).mask(), dir / f.filename());
        ++kept;
      } catch (const EmptySilhouette&) {
        ++dropped;
      }
    }
    if (kept == 0) {
      fs::remove_all(dir);
      spdlog::warn("sequence {} has no foreground in any frame; skipped", rec.key());
    }
    written += kept;
  }
  const Manifest prepared = build_manifest(dst);
  write_manifest_jsonl(prepared, dst / "manifest.jsonl");
  print_counts(out, "prepared", prepared);
  out << written << " frames written, " << dropped << " empty frames dropped\n";
  return kExitOk;
}

int cmd_synth(const RunConfig& rc, const Positional& pos, std::ostream& out) {
  const fs::path root = pos.out_root.empty() ? prepare_run_dir("synth", rc) : fs::path(pos.out_root);
  const Manifest m = generate_dataset(rc.synth, root);
  print_counts(out, root.string(), m);
  return kExitOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const auto dir = prepare_run_dir("train", rc);
  const auto [train_set, test_set] = datasets(rc, true);
  write_list(train_set, dir / "train_list.txt");
  write_list(test_set, dir / "test_list.txt");
  print_counts(out, "train", train_set);
  FrameStore store;
  const auto result = train(train_set, rc.model, rc.train, dir, store);
  out << "checkpoint: " << result.checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  auto model = load_model(rc);
  const auto dir = prepare_run_dir("eval", rc);
  const Manifest test_set = datasets(rc, true).second;
  print_counts(out, "test", test_set);
  FrameStore store;
  const auto outcome = evaluate(model, test_set, store, rc.eval);
  write_eval_outputs(outcome, dir);
  out << report_json(outcome) << "\n";
  return kExitOk;
}

SequenceRecord record_from_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("not a sequence directory: " + dir.string());
  SequenceRecord rec;
  rec.subject_id = dir.parent_path().filename().string();
  rec.sequence_id = dir.filename().string();
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".png") rec.frame_paths.push_back(fs::absolute(e.path()));
  }
  std::sort(rec.frame_paths.begin(), rec.frame_paths.end());
  if (rec.frame_paths.empty()) throw EmptySequence("no PNG frames in " + dir.string());
  return rec;
}

int cmd_infer(const RunConfig& rc, const Positional& pos, std::ostream& out) {
  if (pos.sequences.empty()) throw ConfigError({"infer needs at least one sequence directory"});
  auto model = load_model(rc);
  const auto dir = prepare_run_dir("infer", rc);
  std::ofstream csv(dir / "predictions.csv");
  csv << "sequence,predicted,logit_positive,logit_neutral,logit_negative\n";
  FrameStore store;
  for (const auto& s : pos.sequences) {
    const auto rec = record_from_dir(s);
    const auto logits = sequence_logits(model, rec, store, rc.eval);
    const auto label = to_string(severity_argmax(logits));
    csv << s << "," << label;
    for (float v : logits) csv << "," << format_double(v);
    csv << "\n";
    out << s << " " << label << "\n";
  }
  if (!csv) throw IoError("cannot write predictions.csv");
  return kExitOk;
}

int cmd_ratio_study(const RunConfig& rc, std::ostream& out) {
  const auto dir = prepare_run_dir("ratio-study", rc);
  const auto [pool, test_set] = datasets(rc, false);
  print_counts(out, "pool", pool);
  print_counts(out, "test", test_set);
  FrameStore store;
  const auto runs = ratio_study(pool, test_set, rc.study, rc.model, rc.train, dir, store, rc.eval);
  out << ratio_table(runs);
  return kExitOk;
}

int cmd_cam(const RunConfig& rc, std::ostream& out) {
  auto model = load_model(rc);
  SequenceRecord rec;
  if (!rc.cam.sequence.empty() && fs::is_directory(rc.cam.sequence)) {
    rec = record_from_dir(rc.cam.sequence);
  } else {
    const Manifest test_set = datasets(rc, true).second;
    if (test_set.empty()) throw ConfigError({"the test split is empty"});
    if (rc.cam.sequence.empty()) {
      rec = test_set.records().front();
    } else if (const auto* found = test_set.find(rc.cam.sequence)) {
      rec = *found;
    } else {
      throw ConfigError({"cam.sequence '" + rc.cam.sequence + "' is not a test sequence or directory"});
    }
  }
  const auto dir = prepare_run_dir("cam", rc);
  FrameStore store;
  const auto& frames = store.frames(rec);
  const auto logits = sequence_logits(model, rec, store, {});
  const auto predicted = severity_argmax(logits);
  const auto target = rc.cam.target == "predicted" ? predicted : parse_label(rc.cam.target);
  const auto maps = activation_map(model, frames, target);
  std::string name = rec.key();
  std::replace(name.begin(), name.end(), '/', '_');
  const auto files = render_overlay(frames, maps, dir / name, rc.cam.overlay);

  nlohmann::json summary = {{"sequence", rec.key()},
                            {"label", to_string(rec.label)},
                            {"predicted", to_string(predicted)},
                            {"target", to_string(target)},
                            {"logits", logits},
                            {"frames", maps.size()}};
  std::ofstream(dir / name / "cam_summary.json") << summary.dump(2) << "\n";
  out << files.size() << " images under " << (dir / name).string() << "\n";
  return kExitOk;
}

bool is_validation(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ManifestConflict*>(&e) ||
         dynamic_cast<const FormatError*>(&e) || dynamic_cast<const SplitError*>(&e) ||
         dynamic_cast<const RatioError*>(&e);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gait-based scoliosis screening: data preparation, training, evaluation, CAM",
               "scogait"};
  app.require_subcommand(1);
  Common common;
  Positional pos;

  auto* prepare = app.add_subcommand("prepare", "normalize raw silhouettes into a dataset");
  prepare->add_option("raw_root", pos.raw_root, "raw dataset root")->required();
  prepare->add_option("out_root", pos.out_root, "output dataset root")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic walker dataset");
  add_common(synth, common, false);
  synth->add_option("out_root", pos.out_root, "dataset root (default: <out>/synth/<tag>)");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, common, false);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval_cmd, common, true);
  auto* infer = app.add_subcommand("infer", "classify sequence directories");
  add_common(infer, common, true);
  infer->add_option("sequences", pos.sequences, "directories of PNG frames")->required();
  auto* study = app.add_subcommand("ratio-study", "train and test across class ratios");
  add_common(study, common, false);
  auto* cam = app.add_subcommand("cam", "render activation maps for one sequence");
  add_common(cam, common, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(pos, out);
    const std::string name = app.get_subcommands().front()->get_name();
    const RunConfig rc = resolve(name, common);
    if (synth->parsed()) return cmd_synth(rc, pos, out);
    if (train_cmd->parsed()) return cmd_train(rc, out);
    if (eval_cmd->parsed()) return cmd_eval(rc, out);
    if (infer->parsed()) return cmd_infer(rc, pos, out);
    if (study->parsed()) return cmd_ratio_study(rc, out);
    if (cam->parsed()) return cmd_cam(rc, out);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration\n";
    for (const auto& p : e.problems()) err << "  " << p << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return is_validation(e) ? kExitValidation : kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace scogait
