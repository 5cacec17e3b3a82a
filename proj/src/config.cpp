#include "scogait/config.hpp"

#include <functional>

#include "scogait/errors.hpp"

namespace scogait {

namespace {

std::string to_string(SplitMode m) {
  return m == SplitMode::kSubjectDisjoint ? "subject_disjoint" : "sequence_list";
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "subject_disjoint") return SplitMode::kSubjectDisjoint;
  if (s == "sequence_list") return SplitMode::kSequenceList;
  throw ConfigError({"split.mode: unknown mode '" + s + "'"});
}

std::vector<std::string> error_lines(const std::exception& e) {
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) return c->problems();
  return {e.what()};
}

// Runs `parse` on the raw value of `key` (if present), recording failures.
void parse_with(KeyValueReader& reader, std::vector<std::string>& problems,
                const std::string& key, const std::function<void(const std::string&)>& parse) {
  const std::string* raw = reader.raw(key);
  if (!raw) return;
  try {
    parse(*raw);
  } catch (const std::exception& e) {
    for (auto& line : error_lines(e)) problems.push_back(key + ": " + line);
  }
}

void check(std::vector<std::string>& problems, const std::function<void()>& validate) {
  try {
    validate();
  } catch (const std::exception& e) {
    for (auto& line : error_lines(e)) problems.push_back(line);
  }
}

}  // namespace

RunConfig::RunConfig() {
  study.ratios = {{1, 1, 2}, {1, 1, 4}, {1, 1, 8}, {1, 1, 16}};
}

void RunConfig::propagate_seed() {
  train.seed = seed;
  split.seed = seed;
  eval.seed = seed;
}

RunConfig run_config_from(const KeyValues& kv) {
  RunConfig rc;
  KeyValueReader r(kv);
  std::vector<std::string> problems;

  r.get("run.seed", rc.seed);
  std::string path;
  if (r.has("run.out")) {
    r.get("run.out", path);
    rc.out = path;
  }
  r.get("run.tag", rc.tag);
  if (r.has("run.checkpoint")) {
    r.get("run.checkpoint", path);
    rc.checkpoint = path;
  }

  auto& m = rc.model;
  r.get("model.in_h", m.in_h);
  r.get("model.in_w", m.in_w);
  r.get("model.channels", m.channels);
  r.get("model.strides", m.strides);
  r.get("model.blocks_per_stage", m.blocks_per_stage);
  r.get("model.parts", m.parts);
  r.get("model.embed_dim", m.embed_dim);
  r.get("model.n_classes", m.n_classes);
  parse_with(r, problems, "model.variant", [&](const std::string& s) { m.variant = parse_variant(s); });
  parse_with(r, problems, "model.temporal_pooling",
             [&](const std::string& s) { m.temporal_pooling = parse_temporal_pooling(s); });

  auto& t = rc.train;
  r.get("train.lr0", t.lr0);
  r.get("train.weight_decay", t.weight_decay);
  r.get("train.momentum", t.momentum);
  r.get("train.gamma", t.gamma);
  r.get("train.milestones", t.milestones);
  r.get("train.total_iters", t.total_iters);
  r.get("train.P", t.P);
  r.get("train.K", t.K);
  r.get("train.frames", t.frames);
  r.get("train.margin", t.triplet.margin);
  parse_with(r, problems, "train.mining", [&](const std::string& s) { t.triplet.mining = parse_mining(s); });
  parse_with(r, problems, "train.triplet_reduction",
             [&](const std::string& s) { t.triplet.reduction = parse_reduction(s); });
  r.get("train.log_interval", t.log_interval);

  r.get("eval.frames", rc.eval.frames);
  r.get("eval.sequences_per_pass", rc.eval.sequences_per_pass);

  if (r.has("data.root")) {
    r.get("data.root", path);
    rc.data.root = path;
  }
  if (r.has("data.test_root")) {
    r.get("data.test_root", path);
    rc.data.test_root = path;
  }

  auto& sp = rc.split;
  parse_with(r, problems, "split.mode", [&](const std::string& s) { sp.mode = parse_split_mode(s); });
  r.get("split.test_fraction", sp.test_fraction);
  if (r.has("split.train_list")) {
    r.get("split.train_list", path);
    sp.train_list = path;
  }
  if (r.has("split.test_list")) {
    r.get("split.test_list", path);
    sp.test_list = path;
  }
  parse_with(r, problems, "split.ratio", [&](const std::string& s) {
    if (s == "none" || s.empty()) {
      sp.ratio.reset();
    } else {
      sp.ratio = parse_ratio(s);
    }
  });
  r.get("split.ratio_total", sp.ratio_total);

  auto& st = rc.study;
  parse_with(r, problems, "study.ratios", [&](const std::string& s) {
    st.ratios.clear();
    for (const auto& item : split_list(s)) st.ratios.push_back(parse_ratio(item));
  });
  parse_with(r, problems, "study.variants", [&](const std::string& s) {
    st.variants.clear();
    for (const auto& item : split_list(s)) st.variants.push_back(parse_variant(item));
  });
  std::vector<int> seeds;
  if (r.has("study.seeds")) {
    r.get("study.seeds", seeds);
    st.seeds.clear();
    for (int s : seeds) {
      if (s < 0) problems.push_back("study.seeds: seeds must be non-negative");
      st.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  r.get("study.ratio_total", st.ratio_total);

  r.get("cam.sequence", rc.cam.sequence);
  r.get("cam.target", rc.cam.target);
  r.get("cam.alpha", rc.cam.overlay.alpha);
  r.get("cam.scale", rc.cam.overlay.scale);

  KeyValues synth_kv;
  for (const auto& [k, v] : kv) {
    if (k.rfind("synth.", 0) == 0) {
      synth_kv[k] = v;
      r.raw(k);
    }
  }
  check(problems, [&] { rc.synth = synth_spec_from(synth_kv); });

  for (auto& p : r.problems()) problems.push_back(std::move(p));

  check(problems, [&] { m.validate(); });
  check(problems, [&] { t.validate(); });
  if (rc.eval.frames < 0) problems.push_back("eval.frames must be >= 0 (0 uses every frame)");
  if (rc.eval.sequences_per_pass < 1) problems.push_back("eval.sequences_per_pass must be >= 1");
  if (!(sp.test_fraction > 0 && sp.test_fraction < 1)) {
    problems.push_back("split.test_fraction must lie in (0, 1)");
  }
  if (sp.ratio_total < 0) problems.push_back("split.ratio_total must be >= 0");
  if (st.ratios.empty()) problems.push_back("study.ratios must not be empty");
  if (st.variants.empty()) problems.push_back("study.variants must not be empty");
  if (st.seeds.empty()) problems.push_back("study.seeds must not be empty");
  if (st.ratio_total < 0) problems.push_back("study.ratio_total must be >= 0");
  const auto& target = rc.cam.target;
  if (target != "predicted" && target != "positive" && target != "neutral" && target != "negative") {
    problems.push_back("cam.target must be positive, neutral, negative or predicted");
  }
  if (!(rc.cam.overlay.alpha >= 0 && rc.cam.overlay.alpha <= 1)) {
    problems.push_back("cam.alpha must lie in [0, 1]");
  }
  if (rc.cam.overlay.scale < 1) problems.push_back("cam.scale must be >= 1");

  if (!problems.empty()) throw ConfigError(problems);
  rc.propagate_seed();
  return rc;
}

KeyValues to_keyvalues(const RunConfig& rc) {
  KeyValues kv = to_keyvalues(rc.synth);
  kv["run.seed"] = std::to_string(rc.seed);
  kv["run.out"] = rc.out.string();
  kv["run.tag"] = rc.tag;
  kv["run.checkpoint"] = rc.checkpoint.string();

  const auto& m = rc.model;
  kv["model.in_h"] = std::to_string(m.in_h);
  kv["model.in_w"] = std::to_string(m.in_w);
  kv["model.channels"] = join_list(m.channels);
  kv["model.strides"] = join_list(m.strides);
  kv["model.blocks_per_stage"] = std::to_string(m.blocks_per_stage);
  kv["model.parts"] = std::to_string(m.parts);
  kv["model.embed_dim"] = std::to_string(m.embed_dim);
  kv["model.n_classes"] = std::to_string(m.n_classes);
  kv["model.variant"] = to_string(m.variant);
  kv["model.temporal_pooling"] = to_string(m.temporal_pooling);

  const auto& t = rc.train;
  kv["train.lr0"] = format_double(t.lr0);
  kv["train.weight_decay"] = format_double(t.weight_decay);
  kv["train.momentum"] = format_double(t.momentum);
  kv["train.gamma"] = format_double(t.gamma);
  kv["train.milestones"] = join_list(t.milestones);
  kv["train.total_iters"] = std::to_string(t.total_iters);
  kv["train.P"] = std::to_string(t.P);
  kv["train.K"] = std::to_string(t.K);
  kv["train.frames"] = std::to_string(t.frames);
  kv["train.margin"] = format_double(t.triplet.margin);
  kv["train.mining"] = to_string(t.triplet.mining);
  kv["train.triplet_reduction"] = to_string(t.triplet.reduction);
  kv["train.log_interval"] = std::to_string(t.log_interval);

  kv["eval.frames"] = std::to_string(rc.eval.frames);
  kv["eval.sequences_per_pass"] = std::to_string(rc.eval.sequences_per_pass);

  kv["data.root"] = rc.data.root.string();
  kv["data.test_root"] = rc.data.test_root.string();

  const auto& sp = rc.split;
  kv["split.mode"] = to_string(sp.mode);
  kv["split.test_fraction"] = format_double(sp.test_fraction);
  kv["split.train_list"] = sp.train_list.string();
  kv["split.test_list"] = sp.test_list.string();
  kv["split.ratio"] = sp.ratio ? sp.ratio->str() : "none";
  kv["split.ratio_total"] = std::to_string(sp.ratio_total);

  const auto& st = rc.study;
  std::vector<std::string> ratios, variants;
  for (const auto& x : st.ratios) ratios.push_back(x.str());
  for (auto v : st.variants) variants.push_back(to_string(v));
  std::string seeds;
  for (auto s : st.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
  };
  kv["study.ratios"] = join(ratios);
  kv["study.variants"] = join(variants);
  kv["study.seeds"] = seeds;
  kv["study.ratio_total"] = std::to_string(st.ratio_total);

  kv["cam.sequence"] = rc.cam.sequence;
  kv["cam.target"] = rc.cam.target;
  kv["cam.alpha"] = format_double(rc.cam.overlay.alpha);
  kv["cam.scale"] = std::to_string(rc.cam.overlay.scale);
  return kv;
}

RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides) {
  KeyValues kv;
  if (!file.empty()) kv = read_keyvalues(file);
  apply_overrides(kv, overrides);
  return run_config_from(kv);
}

}  // namespace scogait
