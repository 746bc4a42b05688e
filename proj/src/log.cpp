// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/log.hpp"

#include <iostream>
#include <mutex>

namespace tcnimu {
namespace {

std::mutex &sink_mutex() {
  static std::mutex m;
  return m;
}

LogSink &sink() {
  static LogSink s = [](const std::string &line) { std::cerr << line << '\n'; };
  return s;
}

} // namespace

LogSink set_log_sink(LogSink s) {
  std::lock_guard lock(sink_mutex());
  auto prev = std::move(sink());
  sink() = std::move(s);
  return prev;
}

void log_line(const std::string &line) {
  std::lock_guard lock(sink_mutex());
  if (sink())
    sink()(line);
}

} // namespace tcnimu
