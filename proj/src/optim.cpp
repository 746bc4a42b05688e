// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/optim.hpp"

#include <cmath>
#include <string>

namespace tcnimu {

void RmsPropConfig::validate() const {
  if (lr < 0.0 || (lr == 0.0 && !allow_zero_lr) || !std::isfinite(lr))
    throw ConfigError("rmsprop: learning rate must be > 0, got " + std::to_string(lr));
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw ConfigError("rmsprop: alpha must be in [0, 1)");
  if (!(eps > 0.0))
    throw ConfigError("rmsprop: eps must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("rmsprop: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0))
    throw ConfigError("rmsprop: weight_decay must be >= 0");
}

void rmsprop_step(std::span<ParamTensor *const> params, const RmsPropConfig &cfg) {
  cfg.validate();
  for (ParamTensor *p : params) {
    const std::size_t n = p->value.size();
    if (p->grad.size() != n || p->rms_cache.size() != n || p->momentum_buf.size() != n)
      throw StateError("rmsprop: state of '" + p->name + "' does not match its value");
    double *w = p->value.data();
    double *g = p->grad.data();
    double *rms = p->rms_cache.data();
    double *buf = p->momentum_buf.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i] + cfg.weight_decay * w[i];
      rms[i] = cfg.alpha * rms[i] + (1.0 - cfg.alpha) * gi * gi;
      buf[i] = cfg.momentum * buf[i] + gi / (std::sqrt(rms[i]) + cfg.eps);
      w[i] -= cfg.lr * buf[i];
      g[i] = 0.0;
    }
    require_finite(p->value, "rmsprop_step(" + p->name + ")");
  }
}

} // namespace tcnimu
