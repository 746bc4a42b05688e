// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/model.hpp"

#include <set>

#include "tcnimu/error.hpp"
#include "tcnimu/hash.hpp"
#include "tcnimu/init.hpp"
#include "tcnimu/json_fields.hpp"

namespace tcnimu {

using json_fields::json;
using json_fields::Reader;

const char *fusion_name(Fusion f) { return f == Fusion::mlp ? "mlp" : "lstm"; }
const char *head_name(Head h) { return h == Head::softmax ? "softmax" : "sigmoid"; }

Fusion parse_fusion(const std::string &s) {
  if (s == "mlp")
    return Fusion::mlp;
  if (s == "lstm")
    return Fusion::lstm;
  throw ConfigError("unknown fusion '" + s + "' (mlp|lstm)");
}

Head parse_head(const std::string &s) {
  if (s == "softmax")
    return Head::softmax;
  if (s == "sigmoid")
    return Head::sigmoid;
  throw ConfigError("unknown head '" + s + "' (softmax|sigmoid)");
}

void ModelConfig::validate() const {
  grouping.validate(channels);
  for (auto [v, what] : {std::pair{conv_layers, "conv_layers"}, {filters, "filters"},
                         {kernel_len, "kernel_len"}, {branch_units, "branch_units"},
                         {fusion_units, "fusion_units"}, {fusion_layers, "fusion_layers"},
                         {window_len, "window_len"}})
    if (v < 1)
      throw ConfigError(std::string("model: ") + what + " must be >= 1");
  if (window_len < conv_layers * (kernel_len - 1) + 1)
    throw ConfigError("model: window_len " + std::to_string(window_len) + " leaves no output frame after " +
                      std::to_string(conv_layers) + " convolutions of length " +
                      std::to_string(kernel_len) + " (need >= " +
                      std::to_string(conv_layers * (kernel_len - 1) + 1) + ")");
  if (head == Head::softmax && outputs < 2)
    throw ConfigError("model: a softmax head needs at least 2 classes");
  if (head == Head::sigmoid && outputs < 1)
    throw ConfigError("model: a sigmoid head needs at least 1 attribute");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("model: dropout must lie in [0, 1)");
}

json ModelConfig::to_json() const {
  json limbs = json::array();
  for (const Limb &l : grouping.limbs)
    limbs.push_back({{"name", l.name}, {"channels", l.channels}});
  return {{"limbs", limbs},
          {"channels", channels},
          {"window_len", window_len},
          {"conv_layers", conv_layers},
          {"filters", filters},
          {"kernel_len", kernel_len},
          {"branch_units", branch_units},
          {"fusion", fusion_name(fusion)},
          {"fusion_units", fusion_units},
          {"fusion_layers", fusion_layers},
          {"head", head_name(head)},
          {"outputs", outputs},
          {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const json &doc, const std::string &where) {
  const Reader r(doc, where);
  r.only_keys({"limbs", "channels", "window_len", "conv_layers", "filters", "kernel_len",
               "branch_units", "fusion", "fusion_units", "fusion_layers", "head", "outputs",
               "dropout"});
  auto size = [&](const char *key, long long fallback) {
    const long long v = r.integer(key, fallback);
    if (v < 0)
      r.fail_at(key, "must be >= 0");
    return static_cast<std::size_t>(v);
  };
  ModelConfig c;
  const Reader limbs = r.child("limbs");
  for (std::size_t i = 0; i < limbs.array_size(); ++i) {
    const Reader l = limbs.at(i);
    Limb limb{l.string("name"), {}};
    const Reader ch = l.child("channels");
    for (std::size_t j = 0; j < ch.array_size(); ++j) {
      if (!ch.node()[j].is_number_unsigned())
        ch.at(j).fail("expected a channel index");
      limb.channels.push_back(ch.node()[j].get<std::size_t>());
    }
    c.grouping.limbs.push_back(std::move(limb));
  }
  c.channels = size("channels", 0);
  c.window_len = size("window_len", 100);
  c.conv_layers = size("conv_layers", 4);
  c.filters = size("filters", 64);
  c.kernel_len = size("kernel_len", 5);
  c.branch_units = size("branch_units", 256);
  c.fusion_units = size("fusion_units", 256);
  c.fusion_layers = size("fusion_layers", 2);
  c.outputs = size("outputs", 2);
  c.dropout = r.number("dropout", 0.5);
  try {
    c.fusion = parse_fusion(r.string("fusion", "mlp"));
    c.head = parse_head(r.string("head", "softmax"));
    c.validate();
  } catch (const ConfigError &e) {
    r.fail(e.what());
  }
  return c;
}

std::string ModelConfig::fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

// ---- parameter manifest -------------------------------------------------

namespace {

void push_linear(std::vector<ParamSpec> &out, const std::string &prefix, std::size_t in,
                 std::size_t units) {
  out.push_back({prefix + ".weight", {in, units}, false});
  out.push_back({prefix + ".bias", {units}, true});
}

void push_lstm(std::vector<ParamSpec> &out, const std::string &prefix, std::size_t in,
               std::size_t hidden) {
  out.push_back({prefix + ".w_ih", {in, 4 * hidden}, false});
  out.push_back({prefix + ".w_hh", {hidden, 4 * hidden}, false});
  out.push_back({prefix + ".bias", {4 * hidden}, true});
}

} // namespace

std::vector<ParamSpec> param_manifest(const ModelConfig &c) {
  c.validate();
  std::vector<ParamSpec> out;
  for (const Limb &limb : c.grouping.limbs) {
    const std::string b = "branch." + limb.name;
    std::size_t in = limb.channels.size();
    for (std::size_t i = 0; i < c.conv_layers; ++i) {
      const std::string p = b + ".conv" + std::to_string(i + 1);
      out.push_back({p + ".kernel", {c.kernel_len, in, c.filters}, false});
      out.push_back({p + ".bias", {c.filters}, true});
      in = c.filters;
    }
    if (c.fusion == Fusion::mlp)
      push_linear(out, b + ".head", c.conv_out_len() * c.filters, c.branch_units);
    else
      push_lstm(out, b + ".lstm", c.filters, c.branch_units);
  }
  std::size_t in = c.concat_width();
  for (std::size_t i = 0; i < c.fusion_layers; ++i) {
    const std::string p = "fusion." + std::to_string(i + 1);
    if (c.fusion == Fusion::mlp)
      push_linear(out, p, in, c.fusion_units);
    else
      push_lstm(out, p, in, c.fusion_units);
    in = c.fusion_units;
  }
  push_linear(out, "classifier", in, c.outputs);
  return out;
}

std::size_t param_count(const ModelConfig &config) {
  std::size_t n = 0;
  for (const auto &p : param_manifest(config))
    n += shape_size(p.shape);
  return n;
}

// ---- params -------------------------------------------------------------

ModelParams::ModelParams(ModelConfig config, std::vector<ParamTensor> params)
    : config_(std::move(config)), params_(std::move(params)) {
  const auto manifest = param_manifest(config_);
  if (manifest.size() != params_.size())
    throw SchemaError("model has " + std::to_string(params_.size()) + " tensors, config expects " +
                      std::to_string(manifest.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ParamSpec &spec = manifest[i];
    const ParamTensor &p = params_[i];
    if (p.name != spec.name)
      throw SchemaError("tensor " + std::to_string(i) + " is '" + p.name + "', expected '" +
                        spec.name + "'");
    if (p.shape() != spec.shape)
      throw SchemaError("tensor '" + p.name + "' has shape " + shape_str(p.shape()) +
                        ", config expects " + shape_str(spec.shape));
    index_[p.name] = i;
  }
}

std::vector<ParamTensor *> ModelParams::pointers() {
  std::vector<ParamTensor *> out;
  for (auto &p : params_)
    out.push_back(&p);
  return out;
}

ParamTensor &ModelParams::get(const std::string &name) {
  const auto it = index_.find(name);
  if (it == index_.end())
    throw StateError("no parameter named '" + name + "'");
  return params_[it->second];
}

const ParamTensor &ModelParams::get(const std::string &name) const {
  return const_cast<ModelParams *>(this)->get(name);
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto &p : params_)
    n += p.value.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto &p : params_)
    p.zero_grad();
}

bool ModelParams::same_values(const ModelParams &other) const {
  if (params_.size() != other.params_.size())
    return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value))
      return false;
  return true;
}

ModelParams build(const ModelConfig &config, Rng &rng) {
  std::vector<ParamTensor> params;
  for (const ParamSpec &spec : param_manifest(config))
    params.emplace_back(spec.name, spec.bias ? Tensor(spec.shape) : orthogonal_init(spec.shape, 1.0, rng));
  return ModelParams(config, std::move(params));
}

// ---- forward ------------------------------------------------------------

ForwardResult forward(ModelParams &params, const Tensor &batch, Mode mode, Rng &rng) {
  const ModelConfig &c = params.config();
  if (batch.rank() != 3 || batch.dim(1) != c.window_len || batch.dim(2) != c.channels)
    throw ConfigError("forward: batch shape " + shape_str(batch.shape()) + ", model expects [B, " +
                      std::to_string(c.window_len) + ", " + std::to_string(c.channels) + "]");
  ForwardResult r;
  OpTape &t = r.tape;
  r.input = t.input(batch);

  for (const Limb &limb : c.grouping.limbs) {
    const std::string b = "branch." + limb.name;
    VarId h = t.slice_channels(r.input, limb.channels, b);
    for (std::size_t i = 0; i < c.conv_layers; ++i) {
      const std::string p = b + ".conv" + std::to_string(i + 1);
      h = t.relu(t.conv1d(h, params.get(p + ".kernel"), params.get(p + ".bias"), p));
    }
    if (c.fusion == Fusion::mlp) {
      h = t.relu(t.linear(t.flatten(h), params.get(b + ".head.weight"), params.get(b + ".head.bias"),
                          b + ".head"));
    } else {
      h = t.last_step(t.lstm(h, params.get(b + ".lstm.w_ih"), params.get(b + ".lstm.w_hh"),
                             params.get(b + ".lstm.bias"), b + ".lstm"));
    }
    r.branch_outputs.push_back(h);
  }
  r.concat = r.branch_outputs.size() == 1 ? r.branch_outputs.front() : t.concat(r.branch_outputs);

  VarId h = r.concat;
  if (c.fusion == Fusion::mlp) {
    for (std::size_t i = 0; i < c.fusion_layers; ++i) {
      const std::string p = "fusion." + std::to_string(i + 1);
      h = t.relu(t.linear(h, params.get(p + ".weight"), params.get(p + ".bias"), p));
      h = t.dropout(h, c.dropout, mode, rng);
    }
  } else {
    // fused feature vector as a one-step sequence through the stacked LSTMs
    h = t.as_sequence(h);
    for (std::size_t i = 0; i < c.fusion_layers; ++i) {
      const std::string p = "fusion." + std::to_string(i + 1);
      h = t.lstm(h, params.get(p + ".w_ih"), params.get(p + ".w_hh"), params.get(p + ".bias"), p);
      h = t.dropout(h, c.dropout, mode, rng);
    }
    h = t.last_step(h);
  }
  r.logits = t.linear(h, params.get("classifier.weight"), params.get("classifier.bias"), "classifier");
  r.output = c.head == Head::softmax ? t.softmax(r.logits) : t.sigmoid(r.logits);
  return r;
}

} // namespace tcnimu
