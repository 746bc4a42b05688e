// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include "tcnimu/tensor.hpp"

namespace tcnimu::ops {

// Hidden and cell state, each [batch, hidden].
struct LstmState {
  Tensor h;
  Tensor c;
};

// Everything the backward pass needs from a forward call.
struct LstmCache {
  Tensor input;   // [batch, time, features]
  Tensor h0, c0;  // [batch, hidden]
  Tensor gates;   // [batch, time, 4*hidden], post-activation, order i f g o
  Tensor cells;   // [batch, time, hidden]
  Tensor tanh_c;  // [batch, time, hidden]
  Tensor hidden;  // [batch, time, hidden]
};

struct LstmResult {
  Tensor outputs; // [batch, time, hidden]
  LstmState final_state;
  LstmCache cache;
};

// Single LSTM layer over a sequence.
// w_ih [features, 4*hidden], w_hh [hidden, 4*hidden], bias [4*hidden].
// A null state0 starts from zeros.
LstmResult lstm_forward(const Tensor &input, const Tensor &w_ih, const Tensor &w_hh,
                        const Tensor &bias, const LstmState *state0 = nullptr);

struct LstmGrads {
  Tensor input;
  Tensor w_ih;
  Tensor w_hh;
  Tensor bias;
  LstmState state0;
};

// Backpropagation through time. `d_outputs` is the gradient w.r.t. every
// hidden output; `d_final` optionally adds gradients on the final (h, c).
LstmGrads lstm_backward(const LstmCache &cache, const Tensor &w_ih, const Tensor &w_hh,
                        const Tensor &d_outputs, const LstmState *d_final = nullptr);

} // namespace tcnimu::ops
