// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcnimu/attributes.hpp"
#include "tcnimu/dataio.hpp"
#include "tcnimu/model.hpp"
#include "tcnimu/optim.hpp"

namespace tcnimu {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 100;
  std::size_t epochs = 10;
  double noise_sigma = 0.01;
  std::size_t patience = 3;
  std::uint64_t seed = 42;
  RmsPropConfig optimizer; // lr here is overwritten by `lr`
  bool allow_zero_lr = false;
  // Verify bit-exact tape replay on the first batch of every epoch.
  bool check_replay = false;

  void validate() const;
  RmsPropConfig rmsprop() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json &doc, const std::string &where);
};

// Windows plus their targets. Softmax heads read `labels`, sigmoid heads read
// `targets` (one bit vector per window).
struct LabeledSet {
  std::vector<Window> windows;
  std::vector<int> labels;
  std::vector<std::vector<int>> targets;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
  void check(const ModelConfig &config, const char *what) const;
};

// Class index = position of the window's subject in `subjects` (ascending ids).
LabeledSet identity_set(std::vector<Window> windows, const std::vector<int> &subjects);
LabeledSet attribute_set(std::vector<Window> windows, const AttributeTable &table);

// [batch, window_len, channels] gathered from windows[order[from..to)].
Tensor gather_batch(const std::vector<Window> &windows, std::span<const std::size_t> order);

using Confusion = std::vector<std::vector<std::size_t>>; // [truth][predicted]

Confusion make_confusion(std::size_t classes);
double accuracy(const Confusion &cm);    // percent
double weighted_f1(const Confusion &cm); // percent; F1_c = 0 on zero denominators

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  double wf1 = 0.0;
  Confusion confusion;            // softmax: classes x classes; sigmoid: pooled 2x2 over bits
  std::vector<int> predicted;     // softmax: argmax per window (ties to the lowest index)
  Tensor scores;                  // [N, outputs]
  std::vector<double> bit_accuracy; // sigmoid: percent correct per bit at threshold 0.5
};

EvalResult evaluate(ModelParams &params, const LabeledSet &set, std::size_t batch_size = 100);

struct RunMetrics {
  std::vector<double> train_loss, val_loss, val_accuracy, val_wf1;
  std::size_t best_epoch = 0; // 1-based
  std::size_t epochs_run = 0;
  bool early_stopped = false;
  double test_accuracy = 0.0;
  double test_wf1 = 0.0;
  Confusion test_confusion;

  nlohmann::json to_json() const;
  static RunMetrics from_json(const nlohmann::json &doc);
};

struct TrainResult {
  ModelParams best;
  RunMetrics metrics;
};

using EpochLog = std::function<void(const std::string &)>;

// Trains from `init`, keeps the epoch with the best validation wF1.
TrainResult train(ModelParams init, const LabeledSet &train_set, const LabeledSet &val_set,
                  const TrainConfig &config, const EpochLog &log = {});

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0; // population SD
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> values);

struct RepeatSummary {
  std::vector<RunMetrics> runs;
  std::vector<std::uint64_t> seeds;
  Aggregate accuracy;
  Aggregate wf1;
};

// Runs `run` with n derived seeds and aggregates test accuracy / wF1.
RepeatSummary repeat_runs(std::size_t n, std::uint64_t seed,
                          const std::function<RunMetrics(std::uint64_t)> &run);

} // namespace tcnimu
