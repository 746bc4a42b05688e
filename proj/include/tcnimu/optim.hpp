// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <span>

#include "tcnimu/tensor.hpp"

namespace tcnimu {

struct RmsPropConfig {
  double lr = 1e-4;
  double alpha = 0.99;
  double eps = 1e-8;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // lr == 0 is rejected unless set; used for frozen sanity runs.
  bool allow_zero_lr = false;

  void validate() const;
};

// One RMSProp update with momentum and coupled L2 weight decay, per element:
//   g   = grad + weight_decay * value
//   rms = alpha * rms + (1 - alpha) * g^2
//   buf = momentum * buf + g / (sqrt(rms) + eps)
//   value -= lr * buf
// Gradients are zeroed afterwards.
void rmsprop_step(std::span<ParamTensor *const> params, const RmsPropConfig &cfg);

} // namespace tcnimu
