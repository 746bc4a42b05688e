// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tcnimu {

struct Limb {
  std::string name;
  std::vector<std::size_t> channels;
};

// Ordered limb -> channel-index map. Each limb becomes one network branch.
struct LimbGrouping {
  std::vector<Limb> limbs;

  std::size_t size() const noexcept { return limbs.size(); }
  // Throws ConfigError unless lists are non-empty, disjoint and inside
  // [0, channels).
  void validate(std::size_t channels) const;
  // One limb holding channels 0..channels-1.
  static LimbGrouping single(std::size_t channels, std::string name = "all");
  // `limbs` consecutive blocks of `per_limb` channels.
  static LimbGrouping uniform(std::size_t limbs, std::size_t per_limb);

  friend bool operator==(const LimbGrouping &, const LimbGrouping &) = default;
};

inline bool operator==(const Limb &a, const Limb &b) {
  return a.name == b.name && a.channels == b.channels;
}

} // namespace tcnimu
