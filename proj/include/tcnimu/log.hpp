// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <functional>
#include <string>

namespace tcnimu {

using LogSink = std::function<void(const std::string &)>;

// Replaces the process-wide sink; an empty sink silences logging.
// Returns the previous sink.
LogSink set_log_sink(LogSink sink);
void log_line(const std::string &line);

} // namespace tcnimu
