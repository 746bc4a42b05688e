// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/json_fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tcnimu::json_fields {

Reader Reader::child(const std::string &key) const {
  if (!has(key))
    fail_at(key, "missing required field");
  return Reader((*node_)[key], where_, pointer_ + "/" + key);
}

Reader Reader::at(std::size_t i) const {
  return Reader((*node_)[i], where_, pointer_ + "/" + std::to_string(i));
}

std::size_t Reader::array_size() const {
  if (!node_->is_array())
    fail("expected an array");
  return node_->size();
}

void Reader::fail(const std::string &msg) const {
  throw ConfigError(where_ + ": " + (pointer_.empty() ? "/" : pointer_) + ": " + msg);
}

void Reader::fail_at(const std::string &key, const std::string &msg) const {
  throw ConfigError(where_ + ": " + pointer_ + "/" + key + ": " + msg);
}

double Reader::number(const std::string &key) const {
  if (!has(key))
    fail_at(key, "missing required number");
  const json &v = (*node_)[key];
  if (!v.is_number())
    fail_at(key, "expected a number, got " + std::string(v.type_name()));
  const double d = v.get<double>();
  if (!std::isfinite(d))
    fail_at(key, "number is not finite");
  return d;
}

double Reader::number(const std::string &key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long Reader::integer(const std::string &key) const {
  if (!has(key))
    fail_at(key, "missing required integer");
  const json &v = (*node_)[key];
  if (!v.is_number_integer())
    fail_at(key, "expected an integer, got " + std::string(v.type_name()));
  return v.get<long long>();
}

long long Reader::integer(const std::string &key, long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::string Reader::string(const std::string &key) const {
  if (!has(key))
    fail_at(key, "missing required string");
  const json &v = (*node_)[key];
  if (!v.is_string())
    fail_at(key, "expected a string, got " + std::string(v.type_name()));
  return v.get<std::string>();
}

std::string Reader::string(const std::string &key, const std::string &fallback) const {
  return has(key) ? string(key) : fallback;
}

bool Reader::boolean(const std::string &key, bool fallback) const {
  if (!has(key))
    return fallback;
  const json &v = (*node_)[key];
  if (!v.is_boolean())
    fail_at(key, "expected true/false, got " + std::string(v.type_name()));
  return v.get<bool>();
}

void Reader::only_keys(std::initializer_list<const char *> allowed) const {
  if (!node_->is_object())
    fail("expected an object");
  for (const auto &[key, _] : node_->items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char *a) { return key == a; }))
      fail_at(key, "unknown field");
}

json read_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
}

void write_file(const std::filesystem::path &path, const json &doc) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out)
    throw IoError("write failed for " + path.string());
}

} // namespace tcnimu::json_fields
