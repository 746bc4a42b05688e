// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tcnimu/attributes.hpp"
#include "tcnimu/dataio.hpp"

namespace tcnimu {

// Desk-scale stand-in for a multi-IMU recording campaign. Every subject gets
// a private bank of sinusoids and DC offsets per channel, modulated per
// activity, plus white noise.
struct SynthSpec {
  std::string name = "synthetic";
  std::size_t subjects = 8;
  int first_subject_id = 1;
  std::size_t limbs = 5;
  std::size_t channels_per_limb = 6;
  double sampling_rate = 100.0;
  std::size_t recordings_per_subject = 2;
  std::size_t frames_per_recording = 600;
  std::size_t activities = 3;
  std::size_t activity_block = 200; // frames per activity segment
  double freq_lo = 0.5, freq_hi = 4.0;
  double signature_scale = 1.0; // amplitude of the subject-specific signal
  double noise_sd = 0.3;
  std::uint64_t seed = 1;

  // Explicit metadata (ids must match the generated ones); otherwise drawn
  // stratified from the ranges below so every level of a schema is populated.
  std::vector<SubjectMeta> metadata;
  std::pair<double, double> age_range{20, 60}, weight_range{45, 105}, height_range{155, 192};

  // When set, each attribute bit b of a subject adds a DC shift of
  // +-attribute_strength and, for set bits, a (0.75 + 0.5 b) Hz tone on limb b % limbs.
  std::optional<AttributeSchema> attribute_schema;
  double attribute_strength = 0.0;

  // (source, copy): `copy` reuses the signature of `source` (negative control).
  std::vector<std::pair<int, int>> clones;

  void validate() const;
  std::size_t channels() const { return limbs * channels_per_limb; }
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json &doc, const std::string &where);
};

std::vector<SubjectMeta> synth_metadata(const SynthSpec &spec);

// Writes <dir>/manifest.json and one CSV per recording; returns the manifest.
DatasetManifest write_synthetic(const SynthSpec &spec, const std::filesystem::path &dir);

} // namespace tcnimu
