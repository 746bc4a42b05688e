// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcnimu/limbs.hpp"
#include "tcnimu/model.hpp"
#include "tcnimu/tape.hpp"

namespace tcnimu {

inline constexpr double kLrpEpsilon = 1e-9;

// Relevance bookkeeping for one linear or conv layer.
struct LayerTrace {
  std::string label;
  OpKind kind = OpKind::linear;
  double relevance_out = 0.0; // sum of relevance arriving at the layer output
  double relevance_in = 0.0;  // sum handed to the layer input
  double bias_share = 0.0;    // sum over units of b_k * s_k, absorbed by the bias
  double stabilizer_share = 0.0; // sum of eps*sign(z_k) * s_k
};

struct LrpResult {
  Tensor relevance; // shape of the input node
  std::vector<LayerTrace> trace; // in propagation order (output towards input)
};

// epsilon-rule propagation of `seed` (shaped like node `from`) down to node `to`.
// Supports conv1d, linear, relu, dropout, flatten, slice_channels and concat.
LrpResult lrp_propagate(const OpTape &tape, VarId from, const Tensor &seed, VarId to,
                        double epsilon = kLrpEpsilon);

struct RelevanceMap {
  Tensor relevance; // [window_len, channels]
  double epsilon = kLrpEpsilon;
  std::size_t target = 0;
  double score = 0.0; // explained pre-activation score of the target class
  std::vector<LayerTrace> trace;
};

// window: [window_len, channels]. Starts from the target's classifier logit.
RelevanceMap lrp_explain(ModelParams &params, const Tensor &window, std::size_t target,
                         double epsilon = kLrpEpsilon);

// RMS of max(r, 0) over every (frame, channel) cell of each limb.
std::vector<double> positive_rms_per_limb(const RelevanceMap &map, const LimbGrouping &grouping);

// CSV: frame,channel_name,relevance
std::string relevance_csv(const RelevanceMap &map, const std::vector<std::string> &channel_names);
nlohmann::json relevance_summary(const RelevanceMap &map, const LimbGrouping &grouping);

} // namespace tcnimu
