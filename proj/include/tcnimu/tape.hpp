// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tcnimu/lstm.hpp"
#include "tcnimu/rng.hpp"
#include "tcnimu/tensor.hpp"

namespace tcnimu {

using VarId = std::size_t;

enum class OpKind {
  input,
  conv1d,
  linear,
  relu,
  sigmoid,
  softmax,
  dropout,
  lstm,
  last_step,
  slice_channels,
  flatten,
  concat,
  as_sequence,
};

const char *op_name(OpKind kind);

struct TapeNode {
  OpKind kind = OpKind::input;
  std::string label;
  std::vector<VarId> inputs;
  std::vector<ParamTensor *> params; // conv/linear: {weight, bias}; lstm: {w_ih, w_hh, bias}
  Tensor output;
  Tensor mask;                       // dropout
  std::vector<std::size_t> index;    // slice_channels: selected channels
  std::shared_ptr<const ops::LstmCache> lstm_cache;
};

// Ordered record of executed operators. Each call runs the operator
// immediately, checks its output for non-finite values and appends a node;
// the returned VarId names that node's output.
//
// The tape borrows ParamTensors; they must outlive it and must not be
// updated between forward and backward.
class OpTape {
public:
  VarId input(Tensor value, std::string label = "input");

  VarId conv1d(VarId x, ParamTensor &kernel, ParamTensor &bias, std::string label = {});
  VarId linear(VarId x, ParamTensor &weight, ParamTensor &bias, std::string label = {});
  VarId relu(VarId x);
  VarId sigmoid(VarId x);
  VarId softmax(VarId x);
  VarId dropout(VarId x, double p, Mode mode, Rng &rng);
  // Full output sequence [batch, time, hidden] from a zero initial state.
  VarId lstm(VarId x, ParamTensor &w_ih, ParamTensor &w_hh, ParamTensor &bias,
             std::string label = {});
  // [batch, time, f] -> [batch, f] at the last time step.
  VarId last_step(VarId x);
  // [batch, time, c] -> [batch, time, channels.size()]
  VarId slice_channels(VarId x, std::vector<std::size_t> channels, std::string label = {});
  // [batch, ...] -> [batch, prod(...)]
  VarId flatten(VarId x);
  // Concatenate [batch, f_i] tensors along the feature axis.
  VarId concat(std::span<const VarId> xs);
  // [batch, f] -> [batch, 1, f]
  VarId as_sequence(VarId x);

  const Tensor &value(VarId id) const { return nodes_.at(id).output; }
  const TapeNode &node(VarId id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse-mode pass seeded with `seed` at `out`. Parameter gradients are
  // accumulated into ParamTensor::grad; input gradients can be read with
  // grad() afterwards.
  void backward(VarId out, const Tensor &seed);
  // Gradient w.r.t. a node output after backward(); empty if none reached it.
  const Tensor &grad(VarId id) const;

  // Recomputes every node from the recorded inputs, parameters and dropout
  // masks and returns the recomputed outputs in node order.
  std::vector<Tensor> replay() const;
  // True when replay() reproduces every recorded output bit-for-bit.
  bool replay_matches() const;

private:
  VarId push(TapeNode node);
  Tensor recompute(const TapeNode &node, std::span<const Tensor> in) const;

  std::vector<TapeNode> nodes_;
  std::vector<Tensor> grads_;
};

} // namespace tcnimu
