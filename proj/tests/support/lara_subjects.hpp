// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <vector>

#include "tcnimu/subject.hpp"

namespace tcnimu::testing {

// Recording-protocol metadata of the eight LARa subjects.
inline std::vector<SubjectMeta> lara_subjects() {
  return {
      {7, "M", 23, 65, 177, "R"},  {8, "F", 51, 68, 168, "R"},  {9, "M", 35, 100, 172, "R"},
      {10, "M", 49, 97, 181, "R"}, {11, "F", 47, 66, 175, "R"}, {12, "F", 23, 48, 163, "R"},
      {13, "F", 25, 54, 163, "R"}, {14, "M", 54, 90, 177, "R"},
  };
}

// Eight subjects forming four attribute profiles, two subjects each, with
// different raw biometrics inside each pair. Leaving one subject out keeps its
// profile in training. A profile absent from training cannot be recovered from
// seven subjects by this model (LARa subject 7, for instance, is the only one
// with gender and weight bits that disagree).
inline std::vector<SubjectMeta> paired_subjects(int first_id = 7) {
  return {
      {first_id + 0, "F", 24, 52, 161, "R"}, {first_id + 1, "F", 29, 60, 166, "R"},
      {first_id + 2, "M", 22, 84, 182, "R"}, {first_id + 3, "M", 38, 95, 176, "R"},
      {first_id + 4, "F", 45, 63, 172, "R"}, {first_id + 5, "F", 57, 67, 178, "R"},
      {first_id + 6, "M", 49, 79, 174, "R"}, {first_id + 7, "M", 61, 101, 188, "R"},
  };
}

} // namespace tcnimu::testing
