// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcnimu/limbs.hpp"
#include "tcnimu/rng.hpp"
#include "tcnimu/tape.hpp"
#include "tcnimu/tensor.hpp"

namespace tcnimu {

enum class Fusion { mlp, lstm };
enum class Head { softmax, sigmoid };

const char *fusion_name(Fusion f);
const char *head_name(Head h);
Fusion parse_fusion(const std::string &s);
Head parse_head(const std::string &s);

struct ModelConfig {
  LimbGrouping grouping;
  std::size_t channels = 0; // input channels; every limb index is below this
  std::size_t window_len = 100;
  std::size_t conv_layers = 4;
  std::size_t filters = 64;
  std::size_t kernel_len = 5;
  std::size_t branch_units = 256;
  Fusion fusion = Fusion::mlp;
  std::size_t fusion_units = 256;
  std::size_t fusion_layers = 2;
  Head head = Head::softmax;
  std::size_t outputs = 2; // classes (softmax) or attribute bits (sigmoid)
  double dropout = 0.5;

  void validate() const;
  std::size_t conv_out_len() const { return window_len - conv_layers * (kernel_len - 1); }
  std::size_t concat_width() const { return grouping.size() * branch_units; }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json &doc, const std::string &where);
  // FNV-1a of the canonical config JSON.
  std::string fingerprint() const;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  bool bias = false;
};

// Names and shapes in build order; a pure function of the config.
std::vector<ParamSpec> param_manifest(const ModelConfig &config);
std::size_t param_count(const ModelConfig &config);

class ModelParams {
public:
  ModelParams() = default;
  ModelParams(ModelConfig config, std::vector<ParamTensor> params);

  const ModelConfig &config() const { return config_; }
  std::string fingerprint() const { return config_.fingerprint(); }

  std::vector<ParamTensor> &params() { return params_; }
  const std::vector<ParamTensor> &params() const { return params_; }
  std::vector<ParamTensor *> pointers();
  ParamTensor &get(const std::string &name);
  const ParamTensor &get(const std::string &name) const;
  bool has(const std::string &name) const { return index_.count(name) > 0; }

  std::size_t count() const;
  void zero_grad();
  // Values only; optimizer state and grads are ignored.
  bool same_values(const ModelParams &other) const;

private:
  ModelConfig config_;
  std::vector<ParamTensor> params_;
  std::map<std::string, std::size_t> index_;
};

// Orthogonal weights (gain 1), zero biases, drawn in manifest order.
ModelParams build(const ModelConfig &config, Rng &rng);

struct ForwardResult {
  OpTape tape;
  VarId input = 0;
  std::vector<VarId> branch_outputs; // per limb, before concatenation
  VarId concat = 0;
  VarId logits = 0; // pre-activation classifier output
  VarId output = 0; // softmax or sigmoid scores

  const Tensor &scores() const { return tape.value(output); }
};

// batch: [batch, window_len, channels]
ForwardResult forward(ModelParams &params, const Tensor &batch, Mode mode, Rng &rng);

void save_checkpoint(const ModelParams &params, const std::filesystem::path &path);
ModelParams load_checkpoint(const std::filesystem::path &path);
// Rejects a checkpoint whose config fingerprint differs from `expected`.
ModelParams load_checkpoint(const std::filesystem::path &path, const ModelConfig &expected);

} // namespace tcnimu
