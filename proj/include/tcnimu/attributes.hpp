// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcnimu/subject.hpp"

namespace tcnimu {

enum class Biometric { gender, age, weight, height, handedness };

const char *biometric_name(Biometric b);
Biometric parse_biometric(const std::string &name);

// One biometric turned into bits. Numeric sources use `bounds` (value <= bound
// falls on the low side); one bound gives a single threshold bit unless
// one_hot is set, two or more bounds are always one-hot over the levels.
// Categorical sources (gender, handedness) map each category to a bit value.
struct AttributeDef {
  Biometric source = Biometric::age;
  std::vector<double> bounds;
  std::map<std::string, int> categories;
  bool one_hot = false;
  std::optional<std::pair<double, double>> range; // inclusive, numeric only

  bool categorical() const { return source == Biometric::gender || source == Biometric::handedness; }
  std::size_t levels() const { return bounds.size() + 1; }
  std::size_t bits() const;
  std::vector<std::string> bit_names() const;
};

struct AttributeSchema {
  std::string name;
  std::vector<AttributeDef> attributes;

  std::size_t bits() const;
  std::vector<std::string> bit_names() const;
  void validate() const;

  static AttributeSchema from_json(const nlohmann::json &doc, const std::string &where);
  static AttributeSchema load(const std::filesystem::path &path);
  // Shipped presets: lara_a1, lara_a2, pamap2.
  static AttributeSchema preset(const std::string &name);
  nlohmann::json to_json() const;
};

std::vector<int> encode_subject(const SubjectMeta &meta, const AttributeSchema &schema);

struct AttributeRow {
  int subject_id = 0;
  std::vector<int> bits;
};

struct AttributeTable {
  std::vector<AttributeRow> rows;

  bool empty() const { return rows.empty(); }
  std::size_t width() const { return rows.empty() ? 0 : rows.front().bits.size(); }
  const AttributeRow &row(int subject_id) const;
};

// Rows follow the order of `subjects`. With two or more subjects an attribute
// whose encoding never varies is rejected; a constant single bit only warns.
AttributeTable build_table(const std::vector<SubjectMeta> &subjects, const AttributeSchema &schema);

inline constexpr double kPrmClamp = 1e-6;

double cosine_similarity(std::span<const double> a, std::span<const int> A);
double prm_similarity(std::span<const double> a, std::span<const int> A);

enum class Metric { cosine, prm };
const char *metric_name(Metric m);
Metric parse_metric(const std::string &name);

struct Identification {
  std::vector<int> subjects; // every subject tied at the best score, ascending id
  double score = 0.0;
};

// Zero table rows score 0 under cosine rather than throwing, so an all-zero
// attribute vector is simply never the best match for a nonnegative query.
Identification nna_identify(std::span<const double> a, const AttributeTable &table, Metric metric);

} // namespace tcnimu
