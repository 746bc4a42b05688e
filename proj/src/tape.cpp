// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/tape.hpp"

#include <algorithm>

#include "tcnimu/ops.hpp"

namespace tcnimu {

const char *op_name(OpKind kind) {
  switch (kind) {
  case OpKind::input: return "input";
  case OpKind::conv1d: return "conv1d";
  case OpKind::linear: return "linear";
  case OpKind::relu: return "relu";
  case OpKind::sigmoid: return "sigmoid";
  case OpKind::softmax: return "softmax";
  case OpKind::dropout: return "dropout";
  case OpKind::lstm: return "lstm";
  case OpKind::last_step: return "last_step";
  case OpKind::slice_channels: return "slice_channels";
  case OpKind::flatten: return "flatten";
  case OpKind::concat: return "concat";
  case OpKind::as_sequence: return "as_sequence";
  }
  return "?";
}

namespace {

void add_into(Tensor &dst, const Tensor &src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i] += src[i];
}

Tensor take_last_step(const Tensor &x) {
  const std::size_t batch = x.dim(0), time = x.dim(1), f = x.dim(2);
  Tensor y({batch, f});
  for (std::size_t n = 0; n < batch; ++n)
    std::copy_n(x.data() + (n * time + time - 1) * f, f, y.data() + n * f);
  return y;
}

Tensor take_channels(const Tensor &x, const std::vector<std::size_t> &channels) {
  const std::size_t batch = x.dim(0), time = x.dim(1), c = x.dim(2), k = channels.size();
  Tensor y({batch, time, k});
  for (std::size_t r = 0; r < batch * time; ++r)
    for (std::size_t j = 0; j < k; ++j)
      y[r * k + j] = x[r * c + channels[j]];
  return y;
}

Tensor concat_features(std::span<const Tensor *const> xs) {
  const std::size_t batch = xs.front()->dim(0);
  std::size_t total = 0;
  for (const Tensor *x : xs) {
    if (x->rank() != 2 || x->dim(0) != batch)
      throw ConfigError("concat: inputs must all be [batch, features]");
    total += x->dim(1);
  }
  Tensor y({batch, total});
  for (std::size_t n = 0; n < batch; ++n) {
    std::size_t off = 0;
    for (const Tensor *x : xs) {
      const std::size_t f = x->dim(1);
      std::copy_n(x->data() + n * f, f, y.data() + n * total + off);
      off += f;
    }
  }
  return y;
}

} // namespace

VarId OpTape::push(TapeNode node) {
  require_finite(node.output, node.label.empty() ? op_name(node.kind) : node.label);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

VarId OpTape::input(Tensor value, std::string label) {
  TapeNode n;
  n.kind = OpKind::input;
  n.label = std::move(label);
  n.output = std::move(value);
  return push(std::move(n));
}

VarId OpTape::conv1d(VarId x, ParamTensor &kernel, ParamTensor &bias, std::string label) {
  TapeNode n;
  n.kind = OpKind::conv1d;
  n.label = label.empty() ? kernel.name : std::move(label);
  n.inputs = {x};
  n.params = {&kernel, &bias};
  n.output = ops::conv1d_forward(value(x), kernel.value, bias.value);
  return push(std::move(n));
}

VarId OpTape::linear(VarId x, ParamTensor &weight, ParamTensor &bias, std::string label) {
  TapeNode n;
  n.kind = OpKind::linear;
  n.label = label.empty() ? weight.name : std::move(label);
  n.inputs = {x};
  n.params = {&weight, &bias};
  n.output = ops::linear_forward(value(x), weight.value, bias.value);
  return push(std::move(n));
}

VarId OpTape::relu(VarId x) {
  TapeNode n;
  n.kind = OpKind::relu;
  n.inputs = {x};
  n.output = ops::relu(value(x));
  return push(std::move(n));
}

VarId OpTape::sigmoid(VarId x) {
  TapeNode n;
  n.kind = OpKind::sigmoid;
  n.inputs = {x};
  n.output = ops::sigmoid(value(x));
  return push(std::move(n));
}

VarId OpTape::softmax(VarId x) {
  TapeNode n;
  n.kind = OpKind::softmax;
  n.inputs = {x};
  n.output = ops::softmax(value(x));
  return push(std::move(n));
}

VarId OpTape::dropout(VarId x, double p, Mode mode, Rng &rng) {
  TapeNode n;
  n.kind = OpKind::dropout;
  n.inputs = {x};
  n.output = ops::dropout(value(x), p, mode, rng, &n.mask);
  return push(std::move(n));
}

VarId OpTape::lstm(VarId x, ParamTensor &w_ih, ParamTensor &w_hh, ParamTensor &bias,
                   std::string label) {
  TapeNode n;
  n.kind = OpKind::lstm;
  n.label = label.empty() ? w_ih.name : std::move(label);
  n.inputs = {x};
  n.params = {&w_ih, &w_hh, &bias};
  auto r = ops::lstm_forward(value(x), w_ih.value, w_hh.value, bias.value);
  n.output = std::move(r.outputs);
  n.lstm_cache = std::make_shared<const ops::LstmCache>(std::move(r.cache));
  return push(std::move(n));
}

VarId OpTape::last_step(VarId x) {
  if (value(x).rank() != 3)
    throw ConfigError("last_step expects [batch, time, features]");
  TapeNode n;
  n.kind = OpKind::last_step;
  n.inputs = {x};
  n.output = take_last_step(value(x));
  return push(std::move(n));
}

VarId OpTape::slice_channels(VarId x, std::vector<std::size_t> channels, std::string label) {
  const Tensor &v = value(x);
  if (v.rank() != 3)
    throw ConfigError("slice_channels expects [batch, time, channels]");
  for (std::size_t c : channels)
    if (c >= v.dim(2))
      throw ConfigError("slice_channels: channel " + std::to_string(c) + " out of range " +
                        std::to_string(v.dim(2)));
  TapeNode n;
  n.kind = OpKind::slice_channels;
  n.label = std::move(label);
  n.inputs = {x};
  n.index = std::move(channels);
  n.output = take_channels(v, n.index);
  return push(std::move(n));
}

VarId OpTape::flatten(VarId x) {
  const Tensor &v = value(x);
  TapeNode n;
  n.kind = OpKind::flatten;
  n.inputs = {x};
  n.output = v.reshaped({v.dim(0), v.size() / v.dim(0)});
  return push(std::move(n));
}

VarId OpTape::concat(std::span<const VarId> xs) {
  if (xs.empty())
    throw ConfigError("concat of nothing");
  std::vector<const Tensor *> vals;
  for (VarId id : xs)
    vals.push_back(&value(id));
  TapeNode n;
  n.kind = OpKind::concat;
  n.inputs.assign(xs.begin(), xs.end());
  n.output = concat_features(vals);
  return push(std::move(n));
}

VarId OpTape::as_sequence(VarId x) {
  const Tensor &v = value(x);
  if (v.rank() != 2)
    throw ConfigError("as_sequence expects [batch, features]");
  TapeNode n;
  n.kind = OpKind::as_sequence;
  n.inputs = {x};
  n.output = v.reshaped({v.dim(0), 1, v.dim(1)});
  return push(std::move(n));
}

const Tensor &OpTape::grad(VarId id) const {
  static const Tensor kEmpty;
  return id < grads_.size() ? grads_[id] : kEmpty;
}

void OpTape::backward(VarId out, const Tensor &seed) {
  if (out >= nodes_.size())
    throw StateError("backward: variable " + std::to_string(out) + " is not on the tape");
  require_shape(seed, value(out).shape(), "backward seed");
  grads_.assign(nodes_.size(), Tensor());
  grads_[out] = seed;

  for (std::size_t id = out + 1; id-- > 0;) {
    const Tensor &g = grads_[id];
    if (g.empty())
      continue;
    const TapeNode &n = nodes_[id];
    switch (n.kind) {
    case OpKind::input:
      break;
    case OpKind::conv1d: {
      auto r = ops::conv1d_backward(value(n.inputs[0]), n.params[0]->value, g);
      add_into(n.params[0]->grad, r.kernel);
      add_into(n.params[1]->grad, r.bias);
      add_into(grads_[n.inputs[0]], r.input);
      break;
    }
    case OpKind::linear: {
      auto r = ops::linear_backward(value(n.inputs[0]), n.params[0]->value, g);
      add_into(n.params[0]->grad, r.weight);
      add_into(n.params[1]->grad, r.bias);
      add_into(grads_[n.inputs[0]], r.input);
      break;
    }
    case OpKind::relu:
      add_into(grads_[n.inputs[0]], ops::relu_backward(n.output, g));
      break;
    case OpKind::sigmoid:
      add_into(grads_[n.inputs[0]], ops::sigmoid_backward(n.output, g));
      break;
    case OpKind::softmax:
      add_into(grads_[n.inputs[0]], ops::softmax_backward(n.output, g));
      break;
    case OpKind::dropout:
      add_into(grads_[n.inputs[0]], ops::multiply(g, n.mask));
      break;
    case OpKind::lstm: {
      auto r = ops::lstm_backward(*n.lstm_cache, n.params[0]->value, n.params[1]->value, g);
      add_into(n.params[0]->grad, r.w_ih);
      add_into(n.params[1]->grad, r.w_hh);
      add_into(n.params[2]->grad, r.bias);
      add_into(grads_[n.inputs[0]], r.input);
      break;
    }
    case OpKind::last_step: {
      const Tensor &x = value(n.inputs[0]);
      const std::size_t batch = x.dim(0), time = x.dim(1), f = x.dim(2);
      Tensor dx(x.shape());
      for (std::size_t b = 0; b < batch; ++b)
        std::copy_n(g.data() + b * f, f, dx.data() + (b * time + time - 1) * f);
      add_into(grads_[n.inputs[0]], dx);
      break;
    }
    case OpKind::slice_channels: {
      const Tensor &x = value(n.inputs[0]);
      const std::size_t rows = x.dim(0) * x.dim(1), c = x.dim(2), k = n.index.size();
      Tensor dx(x.shape());
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < k; ++j)
          dx[r * c + n.index[j]] += g[r * k + j];
      add_into(grads_[n.inputs[0]], dx);
      break;
    }
    case OpKind::flatten:
    case OpKind::as_sequence:
      add_into(grads_[n.inputs[0]], g.reshaped(value(n.inputs[0]).shape()));
      break;
    case OpKind::concat: {
      const std::size_t batch = g.dim(0), total = g.dim(1);
      std::size_t off = 0;
      for (VarId in : n.inputs) {
        const std::size_t f = value(in).dim(1);
        Tensor dx({batch, f});
        for (std::size_t b = 0; b < batch; ++b)
          std::copy_n(g.data() + b * total + off, f, dx.data() + b * f);
        add_into(grads_[in], dx);
        off += f;
      }
      break;
    }
    }
  }
}

Tensor OpTape::recompute(const TapeNode &n, std::span<const Tensor> in) const {
  switch (n.kind) {
  case OpKind::input:
    return n.output;
  case OpKind::conv1d:
    return ops::conv1d_forward(in[0], n.params[0]->value, n.params[1]->value);
  case OpKind::linear:
    return ops::linear_forward(in[0], n.params[0]->value, n.params[1]->value);
  case OpKind::relu:
    return ops::relu(in[0]);
  case OpKind::sigmoid:
    return ops::sigmoid(in[0]);
  case OpKind::softmax:
    return ops::softmax(in[0]);
  case OpKind::dropout:
    return ops::multiply(in[0], n.mask);
  case OpKind::lstm:
    return ops::lstm_forward(in[0], n.params[0]->value, n.params[1]->value, n.params[2]->value)
        .outputs;
  case OpKind::last_step:
    return take_last_step(in[0]);
  case OpKind::slice_channels:
    return take_channels(in[0], n.index);
  case OpKind::flatten:
    return in[0].reshaped({in[0].dim(0), in[0].size() / in[0].dim(0)});
  case OpKind::as_sequence:
    return in[0].reshaped({in[0].dim(0), 1, in[0].dim(1)});
  case OpKind::concat: {
    std::vector<const Tensor *> ptrs;
    for (const Tensor &t : in)
      ptrs.push_back(&t);
    return concat_features(ptrs);
  }
  }
  throw StateError("replay: unknown op");
}

std::vector<Tensor> OpTape::replay() const {
  std::vector<Tensor> out;
  out.reserve(nodes_.size());
  for (const TapeNode &n : nodes_) {
    std::vector<Tensor> in;
    for (VarId id : n.inputs)
      in.push_back(out.at(id));
    out.push_back(recompute(n, in));
  }
  return out;
}

bool OpTape::replay_matches() const {
  const auto again = replay();
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!(again[i] == nodes_[i].output))
      return false;
  return true;
}

} // namespace tcnimu
