// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tcnimu/error.hpp"
#include "tcnimu/json_fields.hpp"
#include "tcnimu/log.hpp"

namespace tcnimu {

using json_fields::json;
using json_fields::Reader;

const char *biometric_name(Biometric b) {
  switch (b) {
  case Biometric::gender: return "gender";
  case Biometric::age: return "age";
  case Biometric::weight: return "weight";
  case Biometric::height: return "height";
  case Biometric::handedness: return "handedness";
  }
  return "?";
}

Biometric parse_biometric(const std::string &name) {
  for (Biometric b : {Biometric::gender, Biometric::age, Biometric::weight, Biometric::height,
                      Biometric::handedness})
    if (name == biometric_name(b))
      return b;
  throw SchemaError("unknown biometric '" + name + "'");
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

} // namespace

std::size_t AttributeDef::bits() const {
  if (categorical())
    return 1;
  return (bounds.size() == 1 && !one_hot) ? 1 : levels();
}

std::vector<std::string> AttributeDef::bit_names() const {
  const std::string src = biometric_name(source);
  if (categorical()) {
    // name the category that sets the bit
    for (const auto &[cat, bit] : categories)
      if (bit == 1)
        return {src + "=" + cat};
    return {src};
  }
  if (bits() == 1)
    return {src + ">" + fmt(bounds[0])};
  std::vector<std::string> out;
  for (std::size_t l = 0; l < levels(); ++l) {
    if (l == 0)
      out.push_back(src + "<=" + fmt(bounds[0]));
    else if (l == bounds.size())
      out.push_back(src + ">" + fmt(bounds.back()));
    else
      out.push_back(src + "(" + fmt(bounds[l - 1]) + "," + fmt(bounds[l]) + "]");
  }
  return out;
}

std::size_t AttributeSchema::bits() const {
  std::size_t n = 0;
  for (const auto &a : attributes)
    n += a.bits();
  return n;
}

std::vector<std::string> AttributeSchema::bit_names() const {
  std::vector<std::string> out;
  for (const auto &a : attributes)
    for (auto &n : a.bit_names())
      out.push_back(std::move(n));
  return out;
}

void AttributeSchema::validate() const {
  if (attributes.empty())
    throw SchemaError("schema '" + name + "' has no attributes");
  std::set<Biometric> seen;
  for (const auto &a : attributes) {
    const std::string src = biometric_name(a.source);
    if (!seen.insert(a.source).second)
      throw SchemaError("schema '" + name + "': " + src + " listed twice");
    if (a.categorical()) {
      if (a.categories.size() < 2)
        throw SchemaError("schema '" + name + "': " + src + " needs at least two categories");
      for (const auto &[cat, bit] : a.categories)
        if (bit != 0 && bit != 1)
          throw SchemaError("schema '" + name + "': " + src + " category '" + cat +
                            "' must map to 0 or 1");
      if (!a.bounds.empty() || a.range)
        throw SchemaError("schema '" + name + "': categorical " + src + " takes no bounds");
      continue;
    }
    if (a.bounds.empty())
      throw SchemaError("schema '" + name + "': " + src + " needs at least one bound");
    for (std::size_t i = 0; i < a.bounds.size(); ++i) {
      if (!std::isfinite(a.bounds[i]))
        throw SchemaError("schema '" + name + "': " + src + " bound is not finite");
      if (i > 0 && !(a.bounds[i] > a.bounds[i - 1]))
        throw SchemaError("schema '" + name + "': " + src + " bounds must be strictly increasing");
    }
    if (a.range) {
      const auto [lo, hi] = *a.range;
      if (!(lo <= a.bounds.front() && a.bounds.back() < hi))
        throw SchemaError("schema '" + name + "': " + src + " range [" + fmt(lo) + ", " +
                          fmt(hi) + "] must enclose every bound");
    }
  }
}

AttributeSchema AttributeSchema::from_json(const json &doc, const std::string &where) {
  const Reader root(doc, where);
  root.only_keys({"name", "attributes"});
  AttributeSchema s;
  s.name = root.string("name");
  const Reader attrs = root.child("attributes");
  for (std::size_t i = 0; i < attrs.array_size(); ++i) {
    const Reader r = attrs.at(i);
    r.only_keys({"source", "bounds", "categories", "one_hot", "range"});
    AttributeDef a;
    try {
      a.source = parse_biometric(r.string("source"));
    } catch (const SchemaError &e) {
      r.fail_at("source", e.what());
    }
    if (r.has("bounds")) {
      const Reader b = r.child("bounds");
      for (std::size_t j = 0; j < b.array_size(); ++j) {
        if (!b.node()[j].is_number())
          b.at(j).fail("expected a number");
        a.bounds.push_back(b.node()[j].get<double>());
      }
    }
    if (r.has("categories")) {
      const Reader c = r.child("categories");
      if (!c.node().is_object())
        c.fail("expected an object mapping category to bit value");
      for (const auto &[cat, bit] : c.node().items()) {
        if (!bit.is_number_integer())
          c.fail_at(cat, "expected 0 or 1");
        a.categories[cat] = bit.get<int>();
      }
    }
    a.one_hot = r.boolean("one_hot", false);
    if (r.has("range")) {
      const Reader rg = r.child("range");
      if (rg.array_size() != 2 || !rg.node()[0].is_number() || !rg.node()[1].is_number())
        rg.fail("expected [low, high]");
      a.range = std::pair{rg.node()[0].get<double>(), rg.node()[1].get<double>()};
    }
    s.attributes.push_back(std::move(a));
  }
  try {
    s.validate();
  } catch (const SchemaError &e) {
    throw SchemaError(where + ": " + e.what());
  }
  return s;
}

AttributeSchema AttributeSchema::load(const std::filesystem::path &path) {
  return from_json(json_fields::read_file(path), path.string());
}

AttributeSchema AttributeSchema::preset(const std::string &name) {
  const std::filesystem::path p = std::filesystem::path(TCNIMU_DATA_DIR) / "schemas" / (name + ".json");
  if (!std::filesystem::exists(p))
    throw SchemaError("no attribute schema preset named '" + name + "'");
  return load(p);
}

json AttributeSchema::to_json() const {
  json doc;
  doc["name"] = name;
  doc["attributes"] = json::array();
  for (const auto &a : attributes) {
    json j;
    j["source"] = biometric_name(a.source);
    if (a.categorical()) {
      j["categories"] = json::object();
      for (const auto &[cat, bit] : a.categories)
        j["categories"][cat] = bit;
    } else {
      j["bounds"] = a.bounds;
      if (a.one_hot)
        j["one_hot"] = true;
      if (a.range)
        j["range"] = {a.range->first, a.range->second};
    }
    doc["attributes"].push_back(std::move(j));
  }
  return doc;
}

namespace {

double numeric_value(const SubjectMeta &m, Biometric b) {
  switch (b) {
  case Biometric::age: return m.age;
  case Biometric::weight: return m.weight;
  case Biometric::height: return m.height;
  default: return 0.0;
  }
}

const std::string &category_value(const SubjectMeta &m, Biometric b) {
  return b == Biometric::gender ? m.gender : m.handedness;
}

void encode_one(const SubjectMeta &m, const AttributeDef &a, std::vector<int> &out) {
  const std::string src = biometric_name(a.source);
  if (a.categorical()) {
    const std::string &v = category_value(m, a.source);
    const auto it = a.categories.find(v);
    if (it == a.categories.end())
      throw DataError("subject " + std::to_string(m.id) + ": " + src + " '" + v +
                      "' is not a category of the schema");
    out.push_back(it->second);
    return;
  }
  const double v = numeric_value(m, a.source);
  if (!std::isfinite(v))
    throw DataError("subject " + std::to_string(m.id) + ": " + src + " is not finite");
  if (a.range && (v < a.range->first || v > a.range->second))
    throw DataError("subject " + std::to_string(m.id) + ": " + src + " " + fmt(v) +
                    " lies outside every interval of the schema");
  std::size_t level = 0;
  while (level < a.bounds.size() && v > a.bounds[level])
    ++level;
  if (a.bits() == 1) {
    out.push_back(level == 0 ? 0 : 1);
    return;
  }
  for (std::size_t l = 0; l < a.levels(); ++l)
    out.push_back(l == level ? 1 : 0);
}

} // namespace

std::vector<int> encode_subject(const SubjectMeta &meta, const AttributeSchema &schema) {
  std::vector<int> out;
  out.reserve(schema.bits());
  for (const auto &a : schema.attributes)
    encode_one(meta, a, out);
  return out;
}

const AttributeRow &AttributeTable::row(int subject_id) const {
  for (const auto &r : rows)
    if (r.subject_id == subject_id)
      return r;
  throw DataError("subject " + std::to_string(subject_id) + " is not in the attribute table");
}

AttributeTable build_table(const std::vector<SubjectMeta> &subjects, const AttributeSchema &schema) {
  schema.validate();
  AttributeTable t;
  std::set<int> ids;
  for (const auto &s : subjects) {
    if (!ids.insert(s.id).second)
      throw DataError("subject " + std::to_string(s.id) + " appears twice");
    t.rows.push_back({s.id, encode_subject(s, schema)});
  }
  if (t.rows.size() < 2)
    return t;

  const auto names = schema.bit_names();
  std::size_t offset = 0;
  for (const auto &a : schema.attributes) {
    const std::size_t w = a.bits();
    bool varies = false;
    for (const auto &r : t.rows)
      varies = varies || !std::equal(r.bits.begin() + offset, r.bits.begin() + offset + w,
                                     t.rows.front().bits.begin() + offset);
    if (!varies) {
      const std::string msg = "schema '" + schema.name + "': " + biometric_name(a.source) +
                              " takes the same value for every subject; drop it from the schema";
      log_line("warning: " + msg);
      throw SchemaError(msg);
    }
    for (std::size_t b = offset; b < offset + w; ++b) {
      bool bit_varies = false;
      for (const auto &r : t.rows)
        bit_varies = bit_varies || r.bits[b] != t.rows.front().bits[b];
      if (!bit_varies)
        log_line("warning: schema '" + schema.name + "': bit " + names[b] +
                 " is constant across subjects");
    }
    offset += w;
  }
  return t;
}

namespace {

void check_lengths(std::span<const double> a, std::span<const int> A, const char *who) {
  if (a.size() != A.size() || a.empty())
    throw ConfigError(std::string(who) + ": vector lengths " + std::to_string(a.size()) + " and " +
                      std::to_string(A.size()) + " must match and be non-zero");
}

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a)
    s += v * v;
  return std::sqrt(s);
}

} // namespace

double cosine_similarity(std::span<const double> a, std::span<const int> A) {
  check_lengths(a, A, "cosine_similarity");
  double dot = 0.0, nA = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * A[i];
    nA += static_cast<double>(A[i]) * A[i];
  }
  const double na = norm(a);
  if (na == 0.0 || nA == 0.0)
    throw NumericError("cosine_similarity: zero vector");
  return dot / (na * std::sqrt(nA));
}

double prm_similarity(std::span<const double> a, std::span<const int> A) {
  check_lengths(a, A, "prm_similarity");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]))
      throw NumericError("prm_similarity: non-finite prediction");
    const double p = std::clamp(a[i], kPrmClamp, 1.0 - kPrmClamp);
    s += A[i] ? std::log(p) : std::log1p(-p);
  }
  return s;
}

const char *metric_name(Metric m) { return m == Metric::cosine ? "cosine" : "prm"; }

Metric parse_metric(const std::string &name) {
  if (name == "cosine")
    return Metric::cosine;
  if (name == "prm")
    return Metric::prm;
  throw ConfigError("unknown similarity metric '" + name + "'");
}

Identification nna_identify(std::span<const double> a, const AttributeTable &table, Metric metric) {
  if (table.empty())
    throw DataError("nna_identify: empty attribute table");
  if (metric == Metric::cosine && norm(a) == 0.0)
    throw NumericError("nna_identify: zero query vector");
  Identification best;
  bool first = true;
  for (const auto &r : table.rows) {
    double s;
    if (metric == Metric::prm) {
      s = prm_similarity(a, r.bits);
    } else {
      check_lengths(a, r.bits, "nna_identify");
      const bool zero = std::all_of(r.bits.begin(), r.bits.end(), [](int b) { return b == 0; });
      s = zero ? 0.0 : cosine_similarity(a, r.bits);
    }
    if (first || s > best.score) {
      best.score = s;
      best.subjects = {r.subject_id};
      first = false;
    } else if (s == best.score) {
      best.subjects.push_back(r.subject_id);
    }
  }
  std::sort(best.subjects.begin(), best.subjects.end());
  return best;
}

} // namespace tcnimu
