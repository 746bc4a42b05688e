// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

// Little-endian binary helpers shared by the checkpoint and window-cache files.

#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "tcnimu/error.hpp"

namespace tcnimu::binio {

template <class T> void put(std::string &buf, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  buf.append(reinterpret_cast<const char *>(b), sizeof(T));
}

inline void put_string(std::string &buf, const std::string &s) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  buf += s;
}

class Cursor {
public:
  // `what` names the file kind in truncation errors ("checkpoint", ...)
  Cursor(const std::string &buf, std::size_t end, std::string where, std::string what)
      : buf_(buf), end_(end), where_(std::move(where)), what_(std::move(what)) {}

  template <class T> T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, buf_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string string() { return bytes(get<std::uint32_t>()); }
  std::size_t remaining() const { return end_ - pos_; }

private:
  void need(std::size_t n) const {
    if (n > end_ - pos_)
      throw SchemaError(where_ + ": " + what_ + " is truncated");
  }
  const std::string &buf_;
  std::size_t pos_ = 0;
  std::size_t end_;
  std::string where_, what_;
};

// Whole file as bytes; IoError "<what> not found: <path>" when it cannot be opened.
inline std::string read_all(const std::filesystem::path &path, const std::string &what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(what + " not found: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes next to `path` and renames, so readers never see a half-written file.
inline void write_atomic(const std::filesystem::path &path, const std::string &bytes) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw IoError("short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

} // namespace tcnimu::binio
