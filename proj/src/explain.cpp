// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/explain.hpp"

#include <cmath>
#include <cstdio>

#include "tcnimu/error.hpp"
#include "tcnimu/ops.hpp"

namespace tcnimu {

namespace {

void accumulate(Tensor &dst, const Tensor &src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i] += src[i];
}

double total(const Tensor &t) {
  double s = 0.0;
  for (double v : t.values())
    s += v;
  return s;
}

} // namespace

LrpResult lrp_propagate(const OpTape &tape, VarId from, const Tensor &seed, VarId to, double epsilon) {
  if (from >= tape.size() || to > from)
    throw StateError("lrp: bad node range");
  require_shape(seed, tape.value(from).shape(), "lrp seed");
  if (!(epsilon > 0.0))
    throw ConfigError("lrp: epsilon must be > 0");

  std::vector<Tensor> rel(from + 1);
  rel[from] = seed;
  LrpResult out;
  for (std::size_t id = from + 1; id-- > to + 1;) {
    const Tensor &r = rel[id];
    if (r.empty())
      continue;
    const TapeNode &n = tape.node(id);
    switch (n.kind) {
    case OpKind::conv1d:
    case OpKind::linear: {
      const Tensor &a = tape.value(n.inputs[0]);
      const Tensor &z = n.output;
      const Tensor &bias = n.params[1]->value;
      Tensor s(z.shape());
      LayerTrace tr;
      tr.label = n.label;
      tr.kind = n.kind;
      const std::size_t units = bias.size();
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double stab = epsilon * (z[i] >= 0.0 ? 1.0 : -1.0);
        s[i] = r[i] / (z[i] + stab);
        tr.relevance_out += r[i];
        tr.bias_share += bias[i % units] * s[i];
        tr.stabilizer_share += stab * s[i];
      }
      Tensor c = n.kind == OpKind::linear ? ops::linear_backward_input(n.params[0]->value, s)
                                          : ops::conv1d_backward_input(n.params[0]->value, s, a.dim(1));
      for (std::size_t i = 0; i < c.size(); ++i)
        c[i] *= a[i];
      tr.relevance_in = total(c);
      out.trace.push_back(tr);
      accumulate(rel[n.inputs[0]], c);
      break;
    }
    case OpKind::relu:
    case OpKind::dropout:
      accumulate(rel[n.inputs[0]], r);
      break;
    case OpKind::flatten:
      accumulate(rel[n.inputs[0]], r.reshaped(tape.value(n.inputs[0]).shape()));
      break;
    case OpKind::slice_channels: {
      const Tensor &x = tape.value(n.inputs[0]);
      const std::size_t rows = x.dim(0) * x.dim(1), c = x.dim(2), k = n.index.size();
      Tensor dx(x.shape());
      for (std::size_t row = 0; row < rows; ++row)
        for (std::size_t j = 0; j < k; ++j)
          dx[row * c + n.index[j]] += r[row * k + j];
      accumulate(rel[n.inputs[0]], dx);
      break;
    }
    case OpKind::concat: {
      const std::size_t batch = r.dim(0), width = r.dim(1);
      std::size_t off = 0;
      for (VarId in : n.inputs) {
        const std::size_t f = tape.value(in).dim(1);
        Tensor dx({batch, f});
        for (std::size_t b = 0; b < batch; ++b)
          std::copy_n(r.data() + b * width + off, f, dx.data() + b * f);
        accumulate(rel[in], dx);
        off += f;
      }
      break;
    }
    case OpKind::lstm:
    case OpKind::last_step:
    case OpKind::as_sequence:
      throw ConfigError(std::string("lrp: layer kind '") + op_name(n.kind) +
                        "' is not supported; explain a conv/MLP model instead");
    case OpKind::sigmoid:
    case OpKind::softmax:
      throw ConfigError("lrp: start from the pre-activation scores, not the " + std::string(op_name(n.kind)) + " output");
    case OpKind::input:
      break;
    }
  }
  out.relevance = rel[to].empty() ? Tensor(tape.value(to).shape()) : rel[to];
  if (!out.relevance.all_finite())
    throw NumericError("lrp: relevance is not finite");
  return out;
}

RelevanceMap lrp_explain(ModelParams &params, const Tensor &window, std::size_t target, double epsilon) {
  const ModelConfig &c = params.config();
  if (c.fusion != Fusion::mlp)
    throw ConfigError("lrp: LSTM fusion models are not supported; use an MLP-fusion model");
  if (target >= c.outputs)
    throw ConfigError("lrp: target class " + std::to_string(target) + " outside [0, " +
                      std::to_string(c.outputs) + ")");
  if (window.rank() != 2)
    throw ConfigError("lrp: window must be [window_len, channels]");
  Rng unused(0);
  const ForwardResult f = forward(params, window.reshaped({1, window.dim(0), window.dim(1)}), Mode::eval, unused);
  const Tensor &logits = f.tape.value(f.logits);
  Tensor seed(logits.shape());
  seed[target] = logits[target];
  LrpResult r = lrp_propagate(f.tape, f.logits, seed, f.input, epsilon);
  RelevanceMap m;
  m.relevance = r.relevance.reshaped(window.shape());
  m.epsilon = epsilon;
  m.target = target;
  m.score = logits[target];
  m.trace = std::move(r.trace);
  return m;
}

std::vector<double> positive_rms_per_limb(const RelevanceMap &map, const LimbGrouping &grouping) {
  const Tensor &r = map.relevance;
  if (r.rank() != 2)
    throw ConfigError("relevance map must be [window_len, channels]");
  grouping.validate(r.dim(1));
  std::vector<double> out;
  for (const Limb &l : grouping.limbs) {
    double sq = 0.0;
    for (std::size_t t = 0; t < r.dim(0); ++t)
      for (std::size_t c : l.channels) {
        const double v = std::max(r.at(t, c), 0.0);
        sq += v * v;
      }
    out.push_back(std::sqrt(sq / static_cast<double>(r.dim(0) * l.channels.size())));
  }
  return out;
}

std::string relevance_csv(const RelevanceMap &map, const std::vector<std::string> &names) {
  const Tensor &r = map.relevance;
  if (names.size() != r.dim(1))
    throw ConfigError("relevance_csv: " + std::to_string(names.size()) + " channel names for " +
                      std::to_string(r.dim(1)) + " channels");
  std::string out = "frame,channel_name,relevance\n";
  char buf[48];
  for (std::size_t t = 0; t < r.dim(0); ++t)
    for (std::size_t c = 0; c < r.dim(1); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", r.at(t, c));
      out += std::to_string(t) + "," + names[c] + "," + buf + "\n";
    }
  return out;
}

nlohmann::json relevance_summary(const RelevanceMap &map, const LimbGrouping &grouping) {
  const auto rms = positive_rms_per_limb(map, grouping);
  nlohmann::json limbs = nlohmann::json::array();
  for (std::size_t i = 0; i < rms.size(); ++i)
    limbs.push_back({{"limb", grouping.limbs[i].name}, {"positive_rms", rms[i]}});
  nlohmann::json trace = nlohmann::json::array();
  for (const auto &t : map.trace)
    trace.push_back({{"layer", t.label},
                     {"relevance_out", t.relevance_out},
                     {"relevance_in", t.relevance_in},
                     {"bias_share", t.bias_share},
                     {"stabilizer_share", t.stabilizer_share}});
  double sum = 0.0;
  for (double v : map.relevance.values())
    sum += v;
  return {{"target", map.target},
          {"epsilon", map.epsilon},
          {"score", map.score},
          {"input_relevance_sum", sum},
          {"limbs", limbs},
          {"layers", trace}};
}

} // namespace tcnimu
