// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

// Cache layout under <cache root>/prepared-<key>/:
//   windows.bin  "TCNIMUWN" | u32 version | u64 count | per window:
//                i32 subject | i32 activity | u32 n, recording id | u64 start |
//                u64 rows | u64 cols | f64 data | trailing u64 FNV-1a of all
//                preceding bytes
//   prepared.json  split indices, channel statistics and what the key covers

#include "tcnimu/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "binio.hpp"
#include "tcnimu/explain.hpp"
#include "tcnimu/hash.hpp"
#include "tcnimu/json_fields.hpp"
#include "tcnimu/log.hpp"
#include "tcnimu/synth.hpp"

namespace tcnimu {

using json_fields::json;
using json_fields::Reader;
namespace fs = std::filesystem;

namespace {

constexpr char kWindowMagic[8] = {'T', 'C', 'N', 'I', 'M', 'U', 'W', 'N'};
constexpr std::uint32_t kWindowVersion = 1;
constexpr const char *kCacheTag = "tcnimu-prepare-v1";

fs::path resolve(const fs::path &base, const fs::path &p) {
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

json split_to_json(const SplitSpec &s) {
  json doc = {{"strategy", split_strategy_name(s.strategy)},
              {"train", s.train},
              {"val", s.val},
              {"test", s.test},
              {"loso_train", s.loso_train}};
  if (s.held_out_subject)
    doc["held_out_subject"] = *s.held_out_subject;
  return doc;
}

SplitSpec split_from_json(const Reader &r) {
  r.only_keys({"strategy", "train", "val", "test", "loso_train", "held_out_subject"});
  SplitSpec s;
  try {
    s.strategy = parse_split_strategy(r.string("strategy", split_strategy_name(s.strategy)));
  } catch (const ConfigError &e) {
    r.fail_at("strategy", e.what());
  }
  s.train = r.number("train", s.train);
  s.val = r.number("val", s.val);
  s.test = r.number("test", s.test);
  s.loso_train = r.number("loso_train", s.loso_train);
  if (r.has("held_out_subject"))
    s.held_out_subject = static_cast<int>(r.integer("held_out_subject"));
  try {
    s.validate();
  } catch (const ConfigError &e) {
    r.fail(e.what());
  }
  return s;
}

json arch_to_json(const ModelConfig &m, bool single) {
  return {{"conv_layers", m.conv_layers}, {"filters", m.filters},
          {"kernel_len", m.kernel_len},   {"branch_units", m.branch_units},
          {"fusion", fusion_name(m.fusion)}, {"fusion_units", m.fusion_units},
          {"fusion_layers", m.fusion_layers}, {"dropout", m.dropout},
          {"branches", single ? "single" : "limbs"}};
}

json schema_entry(const ExperimentConfig &c) { return c.schema ? c.schema->to_json() : json(nullptr); }

// Appends every line to <out>/<name> as well as forwarding it.
class RunLog {
public:
  RunLog(const fs::path &file, ProgressLog forward) : forward_(std::move(forward)) {
    fs::create_directories(file.parent_path());
    out_.open(file, std::ios::trunc);
    if (!out_)
      throw IoError("cannot write " + file.string());
  }
  void operator()(const std::string &line) {
    out_ << line << '\n';
    out_.flush();
    if (forward_)
      forward_(line);
  }
  ProgressLog sink() {
    return [this](const std::string &l) { (*this)(l); };
  }

private:
  std::ofstream out_;
  ProgressLog forward_;
};

void echo_config(const ExperimentConfig &c) {
  fs::create_directories(c.out);
  json_fields::write_file(c.out / "config.resolved.json", c.to_json());
}

// Seconds since `t0`, or nothing in deterministic mode.
void stamp_elapsed(json &details, const ExperimentConfig &c, std::chrono::steady_clock::time_point t0) {
  if (c.deterministic)
    return;
  details["elapsed_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- window cache -------------------------------------------------------------

std::string encode_windows(const std::vector<Window> &windows) {
  using binio::put;
  std::string buf(kWindowMagic, sizeof kWindowMagic);
  put<std::uint32_t>(buf, kWindowVersion);
  put<std::uint64_t>(buf, windows.size());
  for (const Window &w : windows) {
    put<std::int32_t>(buf, w.subject_id);
    put<std::int32_t>(buf, w.activity);
    binio::put_string(buf, w.recording_id);
    put<std::uint64_t>(buf, w.start_frame);
    put<std::uint64_t>(buf, w.data.dim(0));
    put<std::uint64_t>(buf, w.data.dim(1));
    for (double v : w.data.values())
      put<double>(buf, v);
  }
  put<std::uint64_t>(buf, fnv1a64(buf));
  return buf;
}

std::vector<Window> decode_windows(const std::string &buf, const std::string &where) {
  if (buf.size() < sizeof kWindowMagic + 4 + 8 + 8 ||
      std::memcmp(buf.data(), kWindowMagic, sizeof kWindowMagic) != 0)
    throw SchemaError(where + ": not a tcnimu window cache");
  const std::size_t body = buf.size() - 8;
  binio::Cursor tail(buf, buf.size(), where, "window cache");
  tail.bytes(body);
  if (tail.get<std::uint64_t>() != fnv1a64(std::string_view(buf).substr(0, body)))
    throw SchemaError(where + ": checksum mismatch");
  binio::Cursor c(buf, body, where, "window cache");
  c.bytes(sizeof kWindowMagic);
  if (c.get<std::uint32_t>() != kWindowVersion)
    throw SchemaError(where + ": unsupported window cache version");
  const auto n = c.get<std::uint64_t>();
  std::vector<Window> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    Window w;
    w.subject_id = c.get<std::int32_t>();
    w.activity = c.get<std::int32_t>();
    w.recording_id = c.string();
    w.start_frame = c.get<std::uint64_t>();
    const auto rows = c.get<std::uint64_t>(), cols = c.get<std::uint64_t>();
    if (rows == 0 || cols == 0 || rows > c.remaining() / 8 / cols)
      throw SchemaError(where + ": window shape exceeds the file");
    w.data = Tensor({rows, cols});
    for (double &v : w.data.storage())
      v = c.get<double>();
    out.push_back(std::move(w));
  }
  if (c.remaining() != 0)
    throw SchemaError(where + ": trailing bytes");
  return out;
}

json stats_to_json(const ChannelStats &s) {
  std::vector<bool> d = s.degenerate;
  return {{"mean", s.mean}, {"sd", s.sd}, {"degenerate", d}};
}

ChannelStats stats_from_json(const json &doc) {
  ChannelStats s;
  doc.at("mean").get_to(s.mean);
  doc.at("sd").get_to(s.sd);
  doc.at("degenerate").get_to(s.degenerate);
  return s;
}

std::string cache_key(const ExperimentConfig &c) {
  Fnv1a h;
  h.update(kCacheTag);
  auto file = [&](const fs::path &p, const char *what) {
    const std::string bytes = binio::read_all(p, what);
    h.update(p.filename().string());
    const std::uint64_t n = bytes.size();
    h.update(&n, sizeof n);
    h.update(bytes);
  };
  file(c.manifest, "manifest");
  const DatasetManifest m = load_manifest(c.manifest);
  for (const RecordingEntry &e : m.recordings)
    file(e.path, "recording");
  json params = {{"window_len", c.windowing.window_len}, {"stride", c.windowing.stride}};
  if (c.task != Task::loocv)
    params["split"] = split_to_json(c.split);
  h.update(params.dump());
  return hex64(h.digest());
}

std::vector<std::size_t> indices_of(const std::vector<Window> &part,
                                    const std::map<std::pair<std::string, std::size_t>, std::size_t> &where) {
  std::vector<std::size_t> out;
  out.reserve(part.size());
  for (const Window &w : part)
    out.push_back(where.at({w.recording_id, w.start_frame}));
  return out;
}

// ---- task plumbing --------------------------------------------------------------

// Class index = rank of the subject id among all recorded subjects.
std::vector<int> class_subjects(const DatasetManifest &m) {
  std::vector<int> ids;
  for (const RecordingEntry &e : m.recordings)
    ids.push_back(e.subject_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

LabeledSet make_set(const ExperimentConfig &c, const PreparedData &d, const std::vector<std::size_t> &idx,
                    const std::optional<AttributeTable> &table) {
  std::vector<Window> w = d.part(idx, c.windowing.normalize);
  return table ? attribute_set(std::move(w), *table) : identity_set(std::move(w), class_subjects(d.manifest));
}

struct Sets {
  LabeledSet train, val, test;
  std::optional<AttributeTable> table;
};

Sets make_sets(const ExperimentConfig &c, const PreparedData &d) {
  Sets s;
  if (c.task == Task::soft_biometric)
    s.table = build_table(d.manifest.subjects, *c.schema);
  s.train = make_set(c, d, d.train, s.table);
  s.val = make_set(c, d, d.val, s.table);
  s.test = make_set(c, d, d.test, s.table);
  if (s.train.empty() || s.val.empty() || s.test.empty())
    throw DataError("split left an empty part (train " + std::to_string(s.train.size()) + ", val " +
                    std::to_string(s.val.size()) + ", test " + std::to_string(s.test.size()) +
                    " windows); use longer recordings or a shorter window");
  return s;
}

struct IdentificationRuns {
  RepeatSummary summary;
  std::vector<IoaReport> ioa;
  std::vector<std::vector<double>> bit_accuracy; // soft-biometric runs
  ModelConfig model;
};

// Repeated training; the first run's best weights become <out>/model.ckpt.
IdentificationRuns run_repeats(const ExperimentConfig &c, const PreparedData &d, const Sets &sets,
                               bool with_ioa, RunLog &log) {
  IdentificationRuns r;
  r.model = c.resolve_model(d.manifest);
  std::size_t run = 0;
  const std::size_t activities = d.manifest.activities.size();
  r.summary = repeat_runs(c.repeat, c.seed, [&](std::uint64_t seed) {
    TrainConfig tc = c.train;
    tc.seed = seed;
    if (c.deterministic)
      tc.check_replay = true;
    Rng init(mix_seed(seed, 0));
    log("run " + std::to_string(run + 1) + "/" + std::to_string(c.repeat) + " seed " + std::to_string(seed));
    TrainResult tr = train(build(r.model, init), sets.train, sets.val, tc, log.sink());
    const EvalResult ev = evaluate(tr.best, sets.test, tc.batch_size);
    tr.metrics.test_accuracy = ev.accuracy;
    tr.metrics.test_wf1 = ev.wf1;
    tr.metrics.test_confusion = ev.confusion;
    json m = tr.metrics.to_json();
    m["seed"] = seed;
    if (!ev.bit_accuracy.empty()) {
      m["test_bit_accuracy"] = ev.bit_accuracy;
      r.bit_accuracy.push_back(ev.bit_accuracy);
    }
    json_fields::write_file(c.out / "runs" / ("run_" + std::to_string(run + 1)) / "metrics.json", m);
    if (run == 0)
      save_checkpoint(tr.best, c.out / "model.ckpt");
    if (with_ioa) {
      std::vector<int> activity;
      for (const Window &w : sets.test.windows)
        activity.push_back(w.activity);
      r.ioa.push_back(compute_ioa(ev.predicted, sets.test.labels, activity, activities));
    }
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << "run " << run + 1 << " test accuracy " << ev.accuracy << " wF1 " << ev.wf1 << " (best epoch "
      << tr.metrics.best_epoch << ")";
    log(s.str());
    ++run;
    return tr.metrics;
  });
  return r;
}

Report identification_report(const ExperimentConfig &c, const PreparedData &d, const IdentificationRuns &r) {
  Report rep = repeat_report(r.summary);
  rep.kind = task_name(c.task == Task::ioa ? Task::person_id : c.task);
  if (c.task == Task::soft_biometric) {
    const auto names = c.schema->bit_names();
    for (std::size_t b = 0; b < names.size(); ++b) {
      std::vector<double> v;
      for (const auto &run : r.bit_accuracy)
        v.push_back(run[b]);
      rep.rows.push_back({"bit:" + names[b], aggregate(v)});
    }
  }
  rep.details["dataset"] = d.manifest.name;
  rep.details["cache_key"] = d.key;
  rep.details["model_fingerprint"] = r.model.fingerprint();
  rep.details["windows"] = {{"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()}};
  rep.details["normalized"] = c.windowing.normalize;
  return rep;
}

} // namespace

// ---- config ----------------------------------------------------------------------

const char *task_name(Task t) {
  switch (t) {
  case Task::person_id: return "person_id";
  case Task::soft_biometric: return "soft_biometric";
  case Task::loocv: return "loocv";
  case Task::ioa: return "ioa";
  case Task::explain: return "explain";
  }
  return "?";
}

Task parse_task(const std::string &name) {
  for (Task t : {Task::person_id, Task::soft_biometric, Task::loocv, Task::ioa, Task::explain})
    if (name == task_name(t))
      return t;
  throw ConfigError("unknown task '" + name + "' (expected person_id, soft_biometric, loocv, ioa or explain)");
}

void ExperimentConfig::validate() const {
  if (!fs::is_regular_file(manifest))
    throw ConfigError("/manifest: file not found: " + manifest.string());
  if ((task == Task::soft_biometric || task == Task::loocv) && !schema)
    throw ConfigError(std::string("/schema: required for task ") + task_name(task));
  if (repeat < 1)
    throw ConfigError("/repeat: must be >= 1");
  if (windowing.window_len < 1 || windowing.stride < 1)
    throw ConfigError("/windowing: window_len and stride must be >= 1");
  if (task != Task::loocv && split.strategy == SplitStrategy::leave_one_subject_out && !split.held_out_subject)
    throw ConfigError("/split/held_out_subject: required for leave_one_subject_out");
  if (explain.checkpoint && !fs::is_regular_file(*explain.checkpoint))
    throw ConfigError("/explain/checkpoint: file not found: " + explain.checkpoint->string());
  if (!(explain.epsilon > 0.0))
    throw ConfigError("/explain/epsilon: must be > 0");
  split.validate();
  train.validate();
}

json ExperimentConfig::to_json() const {
  json doc = {{"task", task_name(task)},
              {"manifest", fs::absolute(manifest).lexically_normal().string()},
              {"split", split_to_json(split)},
              {"windowing",
               {{"window_len", windowing.window_len}, {"stride", windowing.stride}, {"normalize", windowing.normalize}}},
              {"model", arch_to_json(model, single_branch)},
              {"train", train.to_json()},
              {"repeat", repeat},
              {"out", fs::absolute(out).lexically_normal().string()},
              {"seed", seed},
              {"schema", schema_entry(*this)},
              {"folds", folds},
              {"deterministic", deterministic}};
  if (!train_preset.empty())
    doc["train_preset"] = train_preset;
  if (checkpoint)
    doc["checkpoint"] = fs::absolute(*checkpoint).lexically_normal().string();
  json ex = {{"window", explain.window}, {"epsilon", explain.epsilon}};
  if (explain.checkpoint)
    ex["checkpoint"] = fs::absolute(*explain.checkpoint).lexically_normal().string();
  if (explain.target)
    ex["target"] = *explain.target;
  doc["explain"] = ex;
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const json &doc, const fs::path &base, const std::string &where) {
  const Reader r(doc, where);
  if (!doc.is_object())
    r.fail("expected an object");
  r.only_keys({"task", "manifest", "split", "windowing", "model", "train", "train_preset", "repeat", "out",
               "seed", "schema", "folds", "checkpoint", "explain", "deterministic"});
  ExperimentConfig c;
  try {
    c.task = parse_task(r.string("task"));
  } catch (const ConfigError &e) {
    if (!r.has("task"))
      throw;
    r.fail_at("task", e.what());
  }
  c.manifest = resolve(base, r.string("manifest"));
  if (!fs::is_regular_file(c.manifest))
    r.fail_at("manifest", "file not found: " + c.manifest.string());
  if (r.has("split"))
    c.split = split_from_json(r.child("split"));
  if (r.has("windowing")) {
    const Reader w = r.child("windowing");
    w.only_keys({"window_len", "stride", "normalize"});
    const long long len = w.integer("window_len", 100), stride = w.integer("stride", 12);
    if (len < 1)
      w.fail_at("window_len", "must be >= 1");
    if (stride < 1)
      w.fail_at("stride", "must be >= 1");
    c.windowing.window_len = static_cast<std::size_t>(len);
    c.windowing.stride = static_cast<std::size_t>(stride);
    c.windowing.normalize = w.boolean("normalize", true);
  }
  if (r.has("model")) {
    const Reader m = r.child("model");
    m.only_keys({"conv_layers", "filters", "kernel_len", "branch_units", "fusion", "fusion_units",
                 "fusion_layers", "dropout", "branches"});
    auto size = [&](const char *key, std::size_t fallback) {
      const long long v = m.integer(key, static_cast<long long>(fallback));
      if (v < 1)
        m.fail_at(key, "must be >= 1");
      return static_cast<std::size_t>(v);
    };
    c.model.conv_layers = size("conv_layers", c.model.conv_layers);
    c.model.filters = size("filters", c.model.filters);
    c.model.kernel_len = size("kernel_len", c.model.kernel_len);
    c.model.branch_units = size("branch_units", c.model.branch_units);
    c.model.fusion_units = size("fusion_units", c.model.fusion_units);
    c.model.fusion_layers = size("fusion_layers", c.model.fusion_layers);
    c.model.dropout = m.number("dropout", c.model.dropout);
    if (!(c.model.dropout >= 0.0 && c.model.dropout < 1.0))
      m.fail_at("dropout", "must lie in [0, 1)");
    try {
      c.model.fusion = parse_fusion(m.string("fusion", "mlp"));
    } catch (const ConfigError &e) {
      m.fail_at("fusion", e.what());
    }
    const std::string branches = m.string("branches", "limbs");
    if (branches != "limbs" && branches != "single")
      m.fail_at("branches", "expected \"limbs\" or \"single\"");
    c.single_branch = branches == "single";
  }
  if (r.has("train")) {
    const Reader t = r.child("train");
    if (t.node().is_string()) {
      try {
        c.train = loocv_preset(t.node().get<std::string>());
      } catch (const ConfigError &e) {
        t.fail(e.what());
      }
      c.train_preset = t.node().get<std::string>();
    } else {
      c.train = TrainConfig::from_json(t.node(), where + " /train");
    }
  }
  if (r.has("train_preset")) // written back by to_json; informational
    c.train_preset = r.string("train_preset");
  const long long repeat = r.integer("repeat", 5);
  if (repeat < 1)
    r.fail_at("repeat", "must be >= 1");
  c.repeat = static_cast<std::size_t>(repeat);
  c.out = resolve(base, r.string("out", "out"));
  const long long seed = r.integer("seed", 42);
  if (seed < 0)
    r.fail_at("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  if (r.has("schema")) {
    const Reader s = r.child("schema");
    try {
      if (s.node().is_object()) {
        c.schema = AttributeSchema::from_json(s.node(), where + " /schema");
      } else if (s.node().is_string()) {
        const std::string v = s.node().get<std::string>();
        const bool is_path = v.find('/') != std::string::npos || v.ends_with(".json");
        c.schema = is_path ? AttributeSchema::load(resolve(base, v)) : AttributeSchema::preset(v);
      } else {
        s.fail("expected a preset name, a path or an inline schema");
      }
    } catch (const SchemaError &e) {
      s.fail(e.what());
    } catch (const IoError &e) {
      s.fail(e.what());
    }
  }
  if (r.has("folds")) {
    const Reader f = r.child("folds");
    for (std::size_t i = 0; i < f.array_size(); ++i) {
      if (!f.node()[i].is_number_integer())
        f.at(i).fail("expected a subject id");
      c.folds.push_back(f.node()[i].get<int>());
    }
  }
  if (r.has("checkpoint"))
    c.checkpoint = resolve(base, r.string("checkpoint"));
  if (r.has("explain")) {
    const Reader e = r.child("explain");
    e.only_keys({"checkpoint", "window", "target", "epsilon"});
    if (e.has("checkpoint"))
      c.explain.checkpoint = resolve(base, e.string("checkpoint"));
    const long long w = e.integer("window", 0);
    if (w < 0)
      e.fail_at("window", "must be >= 0");
    c.explain.window = static_cast<std::size_t>(w);
    if (e.has("target")) {
      const long long t = e.integer("target");
      if (t < 0)
        e.fail_at("target", "must be >= 0");
      c.explain.target = static_cast<std::size_t>(t);
    }
    c.explain.epsilon = e.number("epsilon", kLrpEpsilon);
  }
  c.deterministic = r.boolean("deterministic", false);
  try {
    c.validate();
  } catch (const ConfigError &e) {
    throw ConfigError(where + ": " + e.what()); // validate() names its own pointer
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path &path) {
  if (!fs::is_regular_file(path))
    throw IoError("config not found: " + path.string());
  return from_json(json_fields::read_file(path), fs::absolute(path).parent_path(), path.string());
}

fs::path ExperimentConfig::checkpoint_path() const { return checkpoint ? *checkpoint : out / "model.ckpt"; }

ModelConfig ExperimentConfig::resolve_model(const DatasetManifest &m) const {
  ModelConfig mc = model;
  mc.channels = m.channels.size();
  mc.grouping = single_branch ? LimbGrouping::single(mc.channels) : m.grouping;
  mc.window_len = windowing.window_len;
  if (task == Task::soft_biometric || task == Task::loocv) {
    mc.head = Head::sigmoid;
    mc.outputs = schema->bits();
  } else {
    mc.head = Head::softmax;
    mc.outputs = class_subjects(m).size();
  }
  mc.validate();
  return mc;
}

// ---- prepare -------------------------------------------------------------------

std::vector<Window> PreparedData::part(const std::vector<std::size_t> &idx, bool normalized) const {
  std::vector<Window> out;
  out.reserve(idx.size());
  for (std::size_t i : idx)
    out.push_back(windows.at(i));
  return normalize(std::move(out), stats, !normalized);
}

fs::path cache_root(const ExperimentConfig &c) {
  if (const char *env = std::getenv("TCNIMU_CACHE_DIR"); env && *env)
    return env;
  return c.out / "cache";
}

PreparedData prepare(const ExperimentConfig &c, const ProgressLog &log) {
  PreparedData d;
  d.manifest = load_manifest(c.manifest);
  d.key = cache_key(c);
  d.cache_dir = cache_root(c) / ("prepared-" + d.key);
  const fs::path win_file = d.cache_dir / "windows.bin", meta_file = d.cache_dir / "prepared.json";

  if (fs::is_regular_file(meta_file) && fs::is_regular_file(win_file)) {
    try {
      const json meta = json_fields::read_file(meta_file);
      d.windows = decode_windows(binio::read_all(win_file, "window cache"), win_file.string());
      meta.at("train").get_to(d.train);
      meta.at("val").get_to(d.val);
      meta.at("test").get_to(d.test);
      d.stats = stats_from_json(meta.at("stats"));
      for (const auto *part : {&d.train, &d.val, &d.test})
        for (std::size_t i : *part)
          if (i >= d.windows.size())
            throw SchemaError("split index out of range");
      d.cache_hit = true;
      if (log)
        log("prepare: cache hit " + d.cache_dir.string());
      return d;
    } catch (const std::exception &e) {
      if (log)
        log(std::string("prepare: ignoring unreadable cache (") + e.what() + "), rebuilding");
      d.windows.clear();
      d.train.clear();
      d.val.clear();
      d.test.clear();
    }
  }

  for (const Recording &rec : load_recordings(d.manifest)) {
    if (rec.dropped_frames && log)
      log("prepare: " + rec.recording_id + " dropped " + std::to_string(rec.dropped_frames) + " invalid frames");
    for (Window &w : segment(rec, c.windowing.window_len, c.windowing.stride))
      d.windows.push_back(std::move(w));
  }
  if (d.windows.empty())
    throw DataError("prepare: no recording is at least " + std::to_string(c.windowing.window_len) +
                    " frames long");
  if (c.task == Task::loocv) {
    d.stats = fit_channel_stats(d.windows);
  } else {
    std::map<std::pair<std::string, std::size_t>, std::size_t> where;
    for (std::size_t i = 0; i < d.windows.size(); ++i)
      where[{d.windows[i].recording_id, d.windows[i].start_frame}] = i;
    const Splits sp = split(d.windows, c.split);
    d.train = indices_of(sp.train, where);
    d.val = indices_of(sp.val, where);
    d.test = indices_of(sp.test, where);
    if (sp.train.empty())
      throw DataError("prepare: the split leaves no training windows");
    d.stats = fit_channel_stats(sp.train);
  }

  json meta = {{"key", d.key},
               {"manifest", fs::absolute(c.manifest).lexically_normal().string()},
               {"window_len", c.windowing.window_len},
               {"stride", c.windowing.stride},
               {"split", c.task == Task::loocv ? json("none (leave-one-subject-out per fold)")
                                               : split_to_json(c.split)},
               {"windows", d.windows.size()},
               {"train", d.train},
               {"val", d.val},
               {"test", d.test},
               {"stats", stats_to_json(d.stats)}};
  // window file first; prepared.json marks the entry complete
  binio::write_atomic(win_file, encode_windows(d.windows));
  binio::write_atomic(meta_file, meta.dump(1) + "\n");
  if (log)
    log("prepare: " + std::to_string(d.windows.size()) + " windows (train " + std::to_string(d.train.size()) +
        ", val " + std::to_string(d.val.size()) + ", test " + std::to_string(d.test.size()) + ") cached in " +
        d.cache_dir.string());
  return d;
}

// ---- commands ------------------------------------------------------------------

PreparedData cmd_prepare(const ExperimentConfig &c, const ProgressLog &log) {
  echo_config(c);
  return prepare(c, log);
}

Report cmd_train(const ExperimentConfig &c, const ProgressLog &log) {
  if (c.task != Task::person_id && c.task != Task::soft_biometric)
    throw ConfigError(std::string("train: task must be person_id or soft_biometric, not ") + task_name(c.task));
  const auto t0 = std::chrono::steady_clock::now();
  echo_config(c);
  RunLog rl(c.out / "train.log", log);
  const PreparedData d = prepare(c, rl.sink());
  const Sets sets = make_sets(c, d);
  const IdentificationRuns runs = run_repeats(c, d, sets, false, rl);
  Report rep = identification_report(c, d, runs);
  stamp_elapsed(rep.details, c, t0);
  emit_report(rep, c.out / "report");
  rl("accuracy " + format_mean_sd(runs.summary.accuracy) + "  wF1 " + format_mean_sd(runs.summary.wf1) +
     " over " + std::to_string(c.repeat) + " run(s)");
  return rep;
}

json cmd_eval(const ExperimentConfig &c, const ProgressLog &log) {
  if (c.task != Task::person_id && c.task != Task::soft_biometric && c.task != Task::ioa)
    throw ConfigError(std::string("eval: task must be person_id, soft_biometric or ioa, not ") + task_name(c.task));
  const fs::path ckpt = c.checkpoint_path();
  if (!fs::is_regular_file(ckpt))
    throw IoError("checkpoint not found: " + ckpt.string());
  echo_config(c);
  const PreparedData d = prepare(c, log);
  ModelParams params = load_checkpoint(ckpt, c.resolve_model(d.manifest));
  const Sets sets = make_sets(c, d);
  const EvalResult ev = evaluate(params, sets.test, c.train.batch_size);
  json out = {{"checkpoint", fs::absolute(ckpt).lexically_normal().string()},
              {"model_fingerprint", params.fingerprint()},
              {"test_windows", sets.test.size()},
              {"loss", ev.loss},
              {"accuracy", ev.accuracy},
              {"wf1", ev.wf1},
              {"confusion", ev.confusion}};
  if (!ev.bit_accuracy.empty())
    out["bit_accuracy"] = ev.bit_accuracy;
  json_fields::write_file(c.out / "eval.json", out);
  if (log) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << "eval: test accuracy " << ev.accuracy << " wF1 " << ev.wf1 << " on " << sets.test.size() << " windows";
    log(s.str());
  }
  return out;
}

Report cmd_loocv(const ExperimentConfig &c, const ProgressLog &log) {
  if (c.task != Task::loocv)
    throw ConfigError(std::string("loocv: task must be loocv, not ") + task_name(c.task));
  const auto t0 = std::chrono::steady_clock::now();
  echo_config(c);
  RunLog rl(c.out / "loocv.log", log);
  const PreparedData d = prepare(c, rl.sink());
  LoocvOptions o;
  o.model = c.resolve_model(d.manifest);
  o.train = c.train;
  o.train.seed = c.seed;
  if (c.deterministic)
    o.train.check_replay = true;
  o.normalize = c.windowing.normalize;
  o.loso_train = c.split.loso_train;
  o.only_folds = c.folds;
  const LoocvReport l = run_loocv(d.windows, d.manifest.subjects, *c.schema, o.model.grouping, o, rl.sink());
  Report rep = loocv_report(l);
  rep.details["dataset"] = d.manifest.name;
  rep.details["cache_key"] = d.key;
  rep.details["train_preset"] = c.train_preset;
  stamp_elapsed(rep.details, c, t0);
  emit_report(rep, c.out / "loocv");
  rl("mean per-bit accuracy " + format_mean_sd(l.mean_bit_accuracy) + "  NNA cosine hit " +
     format_mean_sd(l.cosine_hit) + "  PRM hit " + format_mean_sd(l.prm_hit));
  return rep;
}

Report cmd_ioa(const ExperimentConfig &c, const ProgressLog &log) {
  if (c.task != Task::ioa && c.task != Task::person_id)
    throw ConfigError(std::string("ioa: task must be ioa or person_id, not ") + task_name(c.task));
  const auto t0 = std::chrono::steady_clock::now();
  echo_config(c);
  RunLog rl(c.out / "ioa.log", log);
  const PreparedData d = prepare(c, rl.sink());
  const Sets sets = make_sets(c, d);
  const IdentificationRuns runs = run_repeats(c, d, sets, true, rl);
  Report id = identification_report(c, d, runs);
  stamp_elapsed(id.details, c, t0);
  emit_report(id, c.out / "report");
  Report rep = ioa_report(runs.ioa, d.manifest.activity_names());
  rep.details["dataset"] = d.manifest.name;
  stamp_elapsed(rep.details, c, t0);
  emit_report(rep, c.out / "ioa");
  for (const ReportRow &row : rep.rows)
    rl("IOA+ " + row.key + " " + format_mean_sd(row.value, 3));
  return rep;
}

json cmd_explain(const ExperimentConfig &c, const ProgressLog &log) {
  if (c.task != Task::explain && c.task != Task::person_id)
    throw ConfigError(std::string("explain: task must be explain or person_id, not ") + task_name(c.task));
  echo_config(c);
  RunLog rl(c.out / "explain.log", log);
  const PreparedData d = prepare(c, rl.sink());
  const ModelConfig mc = c.resolve_model(d.manifest);
  if (mc.fusion == Fusion::lstm)
    throw ConfigError("explain: LRP is not defined for LSTM fusion; use model.fusion = \"mlp\"");
  const Sets sets = make_sets(c, d);
  ModelParams params;
  if (c.explain.checkpoint) {
    params = load_checkpoint(*c.explain.checkpoint, mc);
  } else {
    ExperimentConfig once = c;
    once.repeat = 1;
    run_repeats(once, d, sets, false, rl);
    params = load_checkpoint(c.out / "model.ckpt", mc);
  }
  if (c.explain.window >= sets.test.size())
    throw ConfigError("/explain/window: index " + std::to_string(c.explain.window) + " is outside the " +
                      std::to_string(sets.test.size()) + " test windows");
  const Window &w = sets.test.windows[c.explain.window];
  const std::size_t target =
      c.explain.target ? *c.explain.target : static_cast<std::size_t>(sets.test.labels[c.explain.window]);
  const RelevanceMap map = lrp_explain(params, w.data, target, c.explain.epsilon);

  std::ofstream csv(c.out / "relevance.csv", std::ios::trunc);
  if (!csv)
    throw IoError("cannot write " + (c.out / "relevance.csv").string());
  csv << relevance_csv(map, d.manifest.channels);
  // RMS per body limb even for a one-branch model, so both architectures compare
  json summary = relevance_summary(map, d.manifest.grouping);
  summary["window"] = {{"index", c.explain.window},
                       {"subject_id", w.subject_id},
                       {"recording_id", w.recording_id},
                       {"start_frame", w.start_frame},
                       {"activity", w.activity}};
  summary["target_subject"] = class_subjects(d.manifest).at(target);
  summary["model_fingerprint"] = params.fingerprint();
  json_fields::write_file(c.out / "relevance.json", summary);
  std::ostringstream s;
  s << "explain: window " << c.explain.window << " target " << target << " score " << map.score;
  rl(s.str());
  return summary;
}

DatasetManifest cmd_synth(const SynthSpec &spec, const fs::path &out, const ProgressLog &log) {
  const DatasetManifest m = write_synthetic(spec, out);
  json_fields::write_file(out / "synth.resolved.json", spec.to_json());
  if (log)
    log("synth: " + std::to_string(m.subjects.size()) + " subjects, " + std::to_string(m.recordings.size()) +
        " recordings, " + std::to_string(m.channels.size()) + " channels -> " + (out / "manifest.json").string());
  return m;
}

Report cmd_report(const fs::path &report_json, const fs::path &out_stem, const ProgressLog &log) {
  if (!fs::is_regular_file(report_json))
    throw IoError("report not found: " + report_json.string());
  const Report r = report_from_json(json_fields::read_file(report_json));
  emit_report(r, out_stem);
  if (log) {
    log(r.kind);
    for (const ReportRow &row : r.rows)
      log("  " + row.key + "  " + format_mean_sd(row.value) + "  (n=" + std::to_string(row.value.n) + ")");
  }
  return r;
}

} // namespace tcnimu
