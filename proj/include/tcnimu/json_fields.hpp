// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

// Typed access to JSON documents with error messages that carry the file and
// the JSON pointer of the offending value.

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tcnimu/error.hpp"

namespace tcnimu::json_fields {

using nlohmann::json;

class Reader {
public:
  Reader(const json &node, std::string where, std::string pointer = "")
      : node_(&node), where_(std::move(where)), pointer_(std::move(pointer)) {}

  const json &node() const { return *node_; }
  const std::string &pointer() const { return pointer_; }
  bool has(const std::string &key) const {
    return node_->is_object() && node_->contains(key) && !(*node_)[key].is_null();
  }

  Reader child(const std::string &key) const;
  Reader at(std::size_t i) const;
  std::size_t array_size() const;

  [[noreturn]] void fail(const std::string &msg) const;
  [[noreturn]] void fail_at(const std::string &key, const std::string &msg) const;

  double number(const std::string &key) const;
  double number(const std::string &key, double fallback) const;
  long long integer(const std::string &key) const;
  long long integer(const std::string &key, long long fallback) const;
  std::string string(const std::string &key) const;
  std::string string(const std::string &key, const std::string &fallback) const;
  bool boolean(const std::string &key, bool fallback) const;

  // Rejects keys not in `allowed` so typos do not pass silently.
  void only_keys(std::initializer_list<const char *> allowed) const;

private:
  const json *node_;
  std::string where_;
  std::string pointer_;
};

// Reads and parses a JSON file; parse errors become ConfigError with the
// byte offset.
json read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const json &doc);

} // namespace tcnimu::json_fields
