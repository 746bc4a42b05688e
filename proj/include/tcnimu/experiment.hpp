// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcnimu/attributes.hpp"
#include "tcnimu/dataio.hpp"
#include "tcnimu/evaluation.hpp"
#include "tcnimu/explain.hpp"
#include "tcnimu/model.hpp"
#include "tcnimu/synth.hpp"
#include "tcnimu/training.hpp"

namespace tcnimu {

enum class Task { person_id, soft_biometric, loocv, ioa, explain };

const char *task_name(Task t);
Task parse_task(const std::string &name);

struct ExplainOptions {
  std::optional<std::filesystem::path> checkpoint; // trained here when absent
  std::size_t window = 0;                          // index into the test split
  std::optional<std::size_t> target;               // default: the window's true class
  double epsilon = kLrpEpsilon;
};

// One experiment, read from a JSON file. Paths in the file are relative to it.
struct ExperimentConfig {
  Task task = Task::person_id;
  std::filesystem::path manifest;
  SplitSpec split;
  WindowingConfig windowing;
  // Architecture only; grouping, channels, window_len, head and outputs are
  // filled in from the dataset and the task.
  ModelConfig model;
  bool single_branch = false; // one branch over all channels
  TrainConfig train;
  std::string train_preset; // "text" / "table" when `train` named a LOOCV preset
  std::size_t repeat = 5;
  std::filesystem::path out = "out";
  std::uint64_t seed = 42;
  std::optional<AttributeSchema> schema;
  std::vector<int> folds; // LOOCV: subset of held-out subjects, empty = all
  std::optional<std::filesystem::path> checkpoint; // eval input; default <out>/model.ckpt
  ExplainOptions explain;
  // Leaves wall-clock values out of every written file.
  bool deterministic = false;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json &doc, const std::filesystem::path &base_dir,
                                    const std::string &where);
  static ExperimentConfig load(const std::filesystem::path &path);

  std::filesystem::path checkpoint_path() const;
  // Full model config for this task on `manifest`.
  ModelConfig resolve_model(const DatasetManifest &manifest) const;
};

// Windows (raw, before normalization), split indices and training statistics.
struct PreparedData {
  DatasetManifest manifest;
  std::vector<Window> windows;
  std::vector<std::size_t> train, val, test; // indices into windows; empty for LOOCV
  ChannelStats stats;                        // fit on the training part (all windows for LOOCV)
  std::string key;                           // content hash of every input
  std::filesystem::path cache_dir;
  bool cache_hit = false;

  // Normalized (or not, per windowing.normalize) copies of one split.
  std::vector<Window> part(const std::vector<std::size_t> &idx, bool normalized) const;
};

// Cache root: $TCNIMU_CACHE_DIR when set, otherwise <out>/cache.
std::filesystem::path cache_root(const ExperimentConfig &config);

// Segments and splits the dataset, or loads the result from the cache when
// nothing it depends on has changed.
PreparedData prepare(const ExperimentConfig &config, const ProgressLog &log = {});

// Command entry points. Each writes into config.out, echoes the resolved config
// there as config.resolved.json and returns the main report.
PreparedData cmd_prepare(const ExperimentConfig &config, const ProgressLog &log = {});
Report cmd_train(const ExperimentConfig &config, const ProgressLog &log = {});
nlohmann::json cmd_eval(const ExperimentConfig &config, const ProgressLog &log = {});
Report cmd_loocv(const ExperimentConfig &config, const ProgressLog &log = {});
Report cmd_ioa(const ExperimentConfig &config, const ProgressLog &log = {});
nlohmann::json cmd_explain(const ExperimentConfig &config, const ProgressLog &log = {});

// Writes the dataset plus synth.resolved.json into `out`.
DatasetManifest cmd_synth(const SynthSpec &spec, const std::filesystem::path &out, const ProgressLog &log = {});

// Reads a report JSON and rewrites it as CSV (plus a mean ± SD text table on `log`).
Report cmd_report(const std::filesystem::path &report_json, const std::filesystem::path &out_stem,
                  const ProgressLog &log = {});

} // namespace tcnimu
