// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "support/lara_subjects.hpp"
#include "tcnimu/error.hpp"
#include "tcnimu/experiment.hpp"
#include "tcnimu/json_fields.hpp"

using namespace tcnimu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string &name) {
  const fs::path d = fs::temp_directory_path() / ("tcnimu_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// 4 subjects, 2 limbs x 3 channels, 2 recordings of 300 frames each.
SynthSpec tiny_spec() {
  SynthSpec s;
  s.subjects = 4;
  s.first_subject_id = 7;
  s.limbs = 2;
  s.channels_per_limb = 3;
  s.recordings_per_subject = 2;
  s.frames_per_recording = 300;
  s.activities = 3;
  s.activity_block = 100;
  s.seed = 11;
  return s;
}

const fs::path &tiny_dataset() {
  static const fs::path dir = [] {
    const fs::path d = scratch("data");
    write_synthetic(tiny_spec(), d);
    return d;
  }();
  return dir;
}

json tiny_config(const fs::path &out) {
  return {{"task", "person_id"},
          {"manifest", (tiny_dataset() / "manifest.json").string()},
          {"windowing", {{"window_len", 24}, {"stride", 8}}},
          {"model",
           {{"conv_layers", 1},
            {"filters", 4},
            {"kernel_len", 3},
            {"branch_units", 8},
            {"fusion_units", 8},
            {"fusion_layers", 1},
            {"dropout", 0.1}}},
          {"train", {{"lr", 1e-3}, {"batch_size", 16}, {"epochs", 2}}},
          {"repeat", 1},
          {"out", out.string()}};
}

ExperimentConfig parse(const json &doc) { return ExperimentConfig::from_json(doc, fs::current_path(), "cfg"); }

std::string config_error(const json &doc) {
  try {
    parse(doc);
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string &s, const std::string &part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_CASE("config errors name the offending field") {
  const fs::path out = scratch("cfg");
  json doc = tiny_config(out);
  CHECK_NOTHROW(parse(doc));

  json bad = doc;
  bad["bogus"] = 1;
  CHECK(contains(config_error(bad), "bogus"));

  bad = doc;
  bad["windowing"]["stride"] = 0;
  CHECK(contains(config_error(bad), "/windowing/stride"));

  bad = doc;
  bad["model"]["fusion"] = "gru";
  CHECK(contains(config_error(bad), "/model/fusion"));

  bad = doc;
  bad["model"]["dropout"] = 1.0;
  CHECK(contains(config_error(bad), "/model/dropout"));

  bad = doc;
  bad["task"] = "cluster";
  CHECK(contains(config_error(bad), "/task"));

  bad = doc;
  bad["manifest"] = (out / "missing.json").string();
  CHECK(contains(config_error(bad), "/manifest"));

  bad = doc;
  bad["task"] = "loocv"; // needs a schema
  CHECK(contains(config_error(bad), "/schema"));

  bad = doc;
  bad["train"] = "fast";
  CHECK(contains(config_error(bad), "/train"));

  bad = doc;
  bad["repeat"] = 0;
  CHECK(contains(config_error(bad), "/repeat"));

  bad = doc;
  bad["folds"] = json::array({7, "eight"});
  CHECK(contains(config_error(bad), "/folds/1"));

  CHECK_THROWS_AS(ExperimentConfig::load(out / "nope.json"), IoError);
}

TEST_CASE("config paths resolve against the config file and survive a round trip") {
  const fs::path dir = scratch("paths");
  fs::create_directories(dir / "cfg");
  json doc = tiny_config(dir / "o");
  doc["out"] = "../runs";
  doc["train"] = "text";
  doc["task"] = "loocv";
  doc["schema"] = "lara_a1";
  std::ofstream(dir / "cfg" / "c.json") << doc.dump();
  const ExperimentConfig c = ExperimentConfig::load(dir / "cfg" / "c.json");
  CHECK(c.out == (dir / "runs").lexically_normal());
  CHECK(c.train_preset == "text");
  CHECK(c.train.batch_size == 100);
  CHECK(c.schema->bits() == 4);
  CHECK(c.checkpoint_path() == c.out / "model.ckpt");

  const ExperimentConfig again = ExperimentConfig::from_json(c.to_json(), dir, "echo");
  CHECK(again.to_json() == c.to_json());
}

TEST_CASE("resolve_model fills data-dependent fields per task") {
  const fs::path out = scratch("resolve");
  const DatasetManifest m = load_manifest(tiny_dataset() / "manifest.json");
  json doc = tiny_config(out);
  ExperimentConfig c = parse(doc);
  ModelConfig mc = c.resolve_model(m);
  CHECK(mc.channels == 6);
  CHECK(mc.window_len == 24);
  CHECK(mc.head == Head::softmax);
  CHECK(mc.outputs == 4);
  CHECK(mc.grouping.limbs.size() == 2);

  doc["model"]["branches"] = "single";
  mc = parse(doc).resolve_model(m);
  CHECK(mc.grouping.limbs.size() == 1);

  doc["task"] = "soft_biometric";
  doc["schema"] = "lara_a1";
  mc = parse(doc).resolve_model(m);
  CHECK(mc.head == Head::sigmoid);
  CHECK(mc.outputs == 4);
}

TEST_CASE("prepare counts windows per recording and caches by content") {
  const fs::path out = scratch("prepare");
  json doc = tiny_config(out);
  const ExperimentConfig c = parse(doc);
  const PreparedData d = prepare(c);
  CHECK_FALSE(d.cache_hit);

  const DatasetManifest m = load_manifest(c.manifest);
  std::map<std::string, std::size_t> per_rec;
  for (const Window &w : d.windows)
    ++per_rec[w.recording_id];
  CHECK(per_rec.size() == m.recordings.size());
  for (const auto &[rid, n] : per_rec)
    CHECK(n == window_count(300, 24, 8));

  // the three parts are disjoint and cover every window
  std::set<std::size_t> seen;
  for (const auto *part : {&d.train, &d.val, &d.test})
    for (std::size_t i : *part)
      CHECK(seen.insert(i).second);
  CHECK(seen.size() == d.windows.size());

  const PreparedData again = prepare(c);
  CHECK(again.cache_hit);
  CHECK(again.key == d.key);
  CHECK(again.train == d.train);
  CHECK(again.test == d.test);
  REQUIRE(again.windows.size() == d.windows.size());
  for (std::size_t i = 0; i < d.windows.size(); ++i) {
    CHECK(again.windows[i].data.storage() == d.windows[i].data.storage());
    CHECK(again.windows[i].recording_id == d.windows[i].recording_id);
    CHECK(again.windows[i].activity == d.windows[i].activity);
  }

  doc["windowing"]["stride"] = 6;
  const PreparedData other = prepare(parse(doc));
  CHECK_FALSE(other.cache_hit);
  CHECK(other.key != d.key);

  // a damaged cache is rebuilt, not trusted
  {
    std::fstream f(d.cache_dir / "windows.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  const PreparedData rebuilt = prepare(c);
  CHECK_FALSE(rebuilt.cache_hit);
  CHECK(rebuilt.windows.size() == d.windows.size());
  CHECK(prepare(c).cache_hit);
}

TEST_CASE("train, eval, report and explain write their outputs") {
  const fs::path out = scratch("train");
  json doc = tiny_config(out);
  doc["deterministic"] = true;
  const ExperimentConfig c = parse(doc);
  const Report r = cmd_train(c);
  CHECK(r.kind == "person_id");
  for (const char *f : {"report.json", "report.csv", "model.ckpt", "config.resolved.json", "runs/run_1/metrics.json"})
    CHECK_MESSAGE(fs::is_regular_file(out / f), f);
  CHECK_FALSE(json_fields::read_file(out / "report.json")["details"].contains("elapsed_seconds"));

  const json ev = cmd_eval(c);
  const json metrics = json_fields::read_file(out / "runs/run_1/metrics.json");
  CHECK(ev["accuracy"].get<double>() == doctest::Approx(metrics["test_accuracy"].get<double>()));

  const Report back = cmd_report(out / "report.json", out / "again");
  CHECK(slurp(out / "again.csv") == slurp(out / "report.csv"));
  CHECK(back.rows.size() == r.rows.size());

  ExperimentConfig missing = c;
  missing.checkpoint = out / "none.ckpt";
  CHECK_THROWS_AS(cmd_eval(missing), IoError);

  ExperimentConfig ex = c;
  ex.explain.checkpoint = out / "model.ckpt";
  const json rel = cmd_explain(ex);
  CHECK(rel["limbs"].size() == 2);
  CHECK(fs::is_regular_file(out / "relevance.csv"));
  ex.explain.window = 100000;
  CHECK_THROWS_AS(cmd_explain(ex), ConfigError);

  ExperimentConfig lstm = ex;
  lstm.explain.window = 0;
  lstm.model.fusion = Fusion::lstm;
  CHECK_THROWS_AS(cmd_explain(lstm), ConfigError);
}

TEST_CASE("deterministic training reruns are byte-identical") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  json doc = tiny_config(a);
  doc["deterministic"] = true;
  cmd_train(parse(doc));
  doc["out"] = b.string();
  cmd_train(parse(doc));
  for (const char *f : {"model.ckpt", "report.json", "report.csv", "runs/run_1/metrics.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
}

TEST_CASE("ioa and loocv run from a config") {
  const fs::path out = scratch("ioa");
  json doc = tiny_config(out);
  doc["task"] = "ioa";
  const Report r = cmd_ioa(parse(doc));
  CHECK(r.kind == "ioa");
  CHECK(fs::is_regular_file(out / "ioa.csv"));
  for (const ReportRow &row : r.rows) {
    CHECK(row.value.mean >= 0.0);
    CHECK(row.value.mean <= 1.0);
  }

  // attribute-carrying cohort for LOOCV
  const fs::path data = scratch("loocv_data");
  SynthSpec s = tiny_spec();
  s.subjects = 8;
  s.recordings_per_subject = 1;
  s.metadata = testing::paired_subjects();
  s.attribute_schema = AttributeSchema::preset("lara_a1");
  s.attribute_strength = 2.0;
  write_synthetic(s, data);
  const fs::path lo = scratch("loocv");
  doc = tiny_config(lo);
  doc["task"] = "loocv";
  doc["schema"] = "lara_a1";
  doc["manifest"] = (data / "manifest.json").string();
  doc["folds"] = {7, 12};
  const Report l = cmd_loocv(parse(doc));
  CHECK(l.kind == "loocv");
  const json saved = json_fields::read_file(lo / "loocv.json");
  CHECK(saved["details"]["folds"].size() == 2);
}
