// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcnimu/limbs.hpp"
#include "tcnimu/rng.hpp"
#include "tcnimu/subject.hpp"
#include "tcnimu/tensor.hpp"

namespace tcnimu {

// One subject's continuous session.
struct Recording {
  std::string recording_id;
  int subject_id = 0;
  Tensor frames;             // [time, channels]
  std::vector<int> activity; // per frame, -1 = unlabeled; empty when absent
  double sampling_rate = 0.0;
  std::size_t dropped_frames = 0;

  std::size_t time() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
  std::size_t channels() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
  bool has_activity() const { return !activity.empty(); }
};

struct Window {
  Tensor data; // [win_len, channels]
  int subject_id = 0;
  int activity = -1;
  std::string recording_id;
  std::size_t start_frame = 0;
};

struct RecordingEntry {
  std::filesystem::path path; // absolute, resolved against the manifest directory
  int subject_id = 0;
  std::string recording_id;
};

// Dataset description file. See README for the JSON layout.
struct DatasetManifest {
  std::string name;
  double sampling_rate = 0.0;
  std::vector<std::string> channels;
  LimbGrouping grouping;
  std::map<std::string, int> activities;
  std::vector<SubjectMeta> subjects;
  std::vector<RecordingEntry> recordings;
  // Drop frames with non-numeric or non-finite cells instead of failing.
  bool drop_invalid_frames = false;

  const SubjectMeta &subject(int id) const;
  std::vector<std::string> activity_names() const; // indexed by activity id
};

DatasetManifest load_manifest(const std::filesystem::path &path);
void save_manifest(const DatasetManifest &manifest, const std::filesystem::path &path);

// Parses one recording CSV (`frame,<channels...>[,activity]`).
Recording load_recording(const std::filesystem::path &path, const DatasetManifest &manifest,
                         const RecordingEntry &entry);
std::vector<Recording> load_recordings(const DatasetManifest &manifest);

// Sliding windows starting at 0, stride, 2*stride, ... The window label is
// the majority frame label, ties broken by the centre frame's label.
std::vector<Window> segment(const Recording &rec, std::size_t win_len, std::size_t stride);

// Number of windows segment() produces.
constexpr std::size_t window_count(std::size_t time, std::size_t win_len, std::size_t stride) {
  return time < win_len ? 0 : (time - win_len) / stride + 1;
}

inline constexpr double kDegenerateSd = 1e-12;

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> sd;        // population SD; 1 for degenerate channels
  std::vector<bool> degenerate;  // SD < 1e-12 on the fitting set

  std::size_t channels() const { return mean.size(); }
};

// Per-channel mean and population SD over all frames of all windows.
ChannelStats fit_channel_stats(const std::vector<Window> &windows);

// x <- (x - mean) / sd per channel. With `bypass` the windows are returned
// unchanged (the non-normalized arm).
std::vector<Window> normalize(std::vector<Window> windows, const ChannelStats &stats,
                              bool bypass = false);

// Returns `data` plus N(0, sigma^2) noise. The input is not modified.
Tensor add_gaussian_noise(const Tensor &data, double sigma, Rng &rng);

enum class SplitStrategy { per_recording, activity_stacked, leave_one_subject_out };

const char *split_strategy_name(SplitStrategy s);
SplitStrategy parse_split_strategy(const std::string &name);

struct SplitSpec {
  SplitStrategy strategy = SplitStrategy::per_recording;
  double train = 0.64;
  double val = 0.18;
  double test = 0.18;
  // Fraction of the non-held-out windows used for training under
  // leave_one_subject_out; the rest is validation.
  double loso_train = 0.78;
  std::optional<int> held_out_subject;

  void validate() const;
};

struct Splits {
  std::vector<Window> train;
  std::vector<Window> val;
  std::vector<Window> test;
};

// Temporal (unshuffled) splits; see SplitStrategy. Windows must be ordered
// by recording and start frame within each recording, as segment() emits.
Splits split(const std::vector<Window> &windows, const SplitSpec &spec);

// Index boundaries [0, a) [a, b) [b, n) for a temporal cut.
std::pair<std::size_t, std::size_t> cut_points(std::size_t n, double train, double val);

std::vector<int> subject_ids(const std::vector<Window> &windows);

} // namespace tcnimu
