// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <span>

#include "tcnimu/rng.hpp"
#include "tcnimu/tensor.hpp"

// Differentiable operators. Every forward is a pure function of its
// arguments; every backward returns fresh gradient tensors and leaves
// accumulation to the caller (see OpTape).
namespace tcnimu::ops {

// ---- temporal convolution -------------------------------------------------

// Valid cross-correlation along time.
// input [batch, time, in], kernel [k, in, out], bias [out]
// -> [batch, time - k + 1, out]
Tensor conv1d_forward(const Tensor &input, const Tensor &kernel, const Tensor &bias);

struct Conv1dGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};

Conv1dGrads conv1d_backward(const Tensor &input, const Tensor &kernel,
                            const Tensor &upstream);

// Input gradient only; `time` is the input time extent.
Tensor conv1d_backward_input(const Tensor &kernel, const Tensor &upstream,
                             std::size_t time);

// ---- affine ---------------------------------------------------------------

// input [batch, in], weight [in, out], bias [out] -> [batch, out]
Tensor linear_forward(const Tensor &input, const Tensor &weight, const Tensor &bias);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

LinearGrads linear_backward(const Tensor &input, const Tensor &weight,
                            const Tensor &upstream);
Tensor linear_backward_input(const Tensor &weight, const Tensor &upstream);

// ---- elementwise / normalizing activations -------------------------------

Tensor relu(const Tensor &x);
Tensor relu_backward(const Tensor &output, const Tensor &upstream);

// Logistic function. Results are clamped into the open interval (0, 1).
Tensor sigmoid(const Tensor &x);
Tensor sigmoid_backward(const Tensor &output, const Tensor &upstream);

Tensor tanh(const Tensor &x);

// Row-wise softmax of a [batch, classes] tensor (max-subtracted).
Tensor softmax(const Tensor &x);
Tensor softmax_backward(const Tensor &output, const Tensor &upstream);

// ---- dropout ----------------------------------------------------------------

// Mask with entries 0 (dropped) or 1/(1-p) (kept). p must be in [0, 1).
Tensor dropout_mask(const Shape &shape, double p, Rng &rng);

// Inverted dropout. Eval mode and p == 0 return the input unchanged and draw
// nothing from the generator. When `mask_out` is given it receives the mask
// (all ones in the identity cases).
Tensor dropout(const Tensor &input, double p, Mode mode, Rng &rng, Tensor *mask_out = nullptr);

Tensor multiply(const Tensor &a, const Tensor &b);

// ---- losses -------------------------------------------------------------------

struct LossResult {
  double loss = 0.0;
  Tensor grad; // d loss / d input, same shape as the input
};

// Mean over the batch of -log softmax(logits)[target].
LossResult cross_entropy_loss(const Tensor &logits, std::span<const int> targets);

inline constexpr double kBceClamp = 1e-7;

// Mean over batch and attributes of the binary cross entropy of
// sigmoid-activated probabilities, clamped to [1e-7, 1 - 1e-7].
LossResult bce_loss(const Tensor &probs, const Tensor &targets);

} // namespace tcnimu::ops
