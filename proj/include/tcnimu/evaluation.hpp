// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcnimu/attributes.hpp"
#include "tcnimu/dataio.hpp"
#include "tcnimu/model.hpp"
#include "tcnimu/training.hpp"

namespace tcnimu {

// ---- impact of activities ---------------------------------------------------

struct IoaRow {
  int activity = 0;
  std::size_t n_plus = 0;  // windows whose identity was predicted correctly
  std::size_t n_minus = 0; // misidentified windows
  double ioa = 0.0;        // n_plus / (n_plus + n_minus)
};

struct IoaReport {
  std::vector<IoaRow> rows;      // activities with at least one window, ascending
  std::vector<int> omitted;      // activity ids in [0, activities) with no window
  std::size_t unlabeled = 0;     // windows with activity -1, not counted
  std::size_t total = 0;         // labelled windows counted
  double overall_accuracy = 0.0; // fraction in [0,1] over counted windows
};

IoaReport compute_ioa(std::span<const int> predicted, std::span<const int> truth,
                      std::span<const int> activity, std::size_t activities);

// ---- retrieval scoring --------------------------------------------------------

// A retrieved group is a hit when it contains the true subject.
bool group_hit(const Identification &id, int truth);

// ---- leave-one-subject-out soft-biometrics --------------------------------------

struct WindowingConfig {
  std::size_t window_len = 100;
  std::size_t stride = 12;
  bool normalize = true;
};

struct LoocvFold {
  int held_out = 0;
  std::vector<int> train_subjects, val_subjects, test_subjects;
  std::size_t train_windows = 0, val_windows = 0, test_windows = 0;
  std::vector<int> truth_bits;
  std::vector<double> bit_accuracy; // percent, held-out windows, threshold 0.5
  double mean_bit_accuracy = 0.0;
  double cosine_hit = 0.0;          // percent of held-out windows whose NNA group contains the subject
  double prm_hit = 0.0;
  double metric_agreement = 0.0;    // percent of windows where cosine and PRM return the same group
  std::map<int, std::size_t> cosine_retrieved; // first subject of each retrieved group -> count
  RunMetrics metrics;
};

struct LoocvReport {
  std::string schema;
  std::vector<std::string> bit_names;
  std::vector<LoocvFold> folds;
  std::vector<Aggregate> bit_accuracy; // per bit across folds
  Aggregate mean_bit_accuracy, cosine_hit, prm_hit;
};

struct LoocvOptions {
  ModelConfig model; // architecture; grouping/channels/head/outputs are filled per run
  TrainConfig train;
  bool normalize = true;
  double loso_train = 0.78;
  std::vector<int> only_folds; // empty = every subject
};

// Text preset: mB 100, 10 epochs, lr 1e-4. Table preset: lr 1e-3, 50 epochs.
TrainConfig loocv_preset(const std::string &name);

using ProgressLog = std::function<void(const std::string &)>;

// `windows` are raw (unnormalized); statistics are fit per fold on its training part.
LoocvReport run_loocv(const std::vector<Window> &windows, const std::vector<SubjectMeta> &subjects,
                      const AttributeSchema &schema, const LimbGrouping &grouping,
                      const LoocvOptions &options, const ProgressLog &log = {});

// ---- reports ---------------------------------------------------------------

inline constexpr int kReportVersion = 1;

struct ReportRow {
  std::string key;
  Aggregate value;
};

struct Report {
  std::string kind;
  nlohmann::json details = nlohmann::json::object();
  std::vector<ReportRow> rows;
};

// "93.96 ± 0.03"
std::string format_mean_sd(const Aggregate &a, int decimals = 2);

nlohmann::json report_to_json(const Report &r);
Report report_from_json(const nlohmann::json &doc);
std::string report_to_csv(const Report &r);
Report report_from_csv(const std::string &csv, const std::string &kind);

// Writes <stem>.json and <stem>.csv.
void emit_report(const Report &r, const std::filesystem::path &stem);

Report repeat_report(const RepeatSummary &s);
Report ioa_report(const std::vector<IoaReport> &runs, const std::vector<std::string> &activity_names);
Report loocv_report(const LoocvReport &r);

} // namespace tcnimu
