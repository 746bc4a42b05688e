// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <string>

namespace tcnimu {

// Recording-protocol entry for one subject.
struct SubjectMeta {
  int id = 0;
  std::string gender;     // "F" | "M"
  double age = 0.0;       // years
  double weight = 0.0;    // kg
  double height = 0.0;    // cm
  std::string handedness; // "L" | "R"
};

} // namespace tcnimu
