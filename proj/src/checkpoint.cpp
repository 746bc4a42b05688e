// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

// Checkpoint layout (all integers and floats little-endian):
//   "TCNIMUCK" | u32 version | u64 n, config JSON | u64 tensors
//   per tensor: u32 n, name | u32 rank | u64 dims[rank] | f64 data[...]
//   u64 FNV-1a of every preceding byte

#include <cstring>

#include "binio.hpp"
#include "tcnimu/error.hpp"
#include "tcnimu/hash.hpp"
#include "tcnimu/model.hpp"

namespace tcnimu {

namespace {

constexpr char kMagic[8] = {'T', 'C', 'N', 'I', 'M', 'U', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

using binio::Cursor;
using binio::put;

} // namespace

void save_checkpoint(const ModelParams &params, const std::filesystem::path &path) {
  std::string buf(kMagic, sizeof kMagic);
  put<std::uint32_t>(buf, kVersion);
  const std::string cfg = params.config().to_json().dump();
  put<std::uint64_t>(buf, cfg.size());
  buf += cfg;
  put<std::uint64_t>(buf, params.params().size());
  for (const ParamTensor &p : params.params()) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape())
      put<std::uint64_t>(buf, d);
    for (double v : p.value.values())
      put<double>(buf, v);
  }
  put<std::uint64_t>(buf, fnv1a64(buf));

  binio::write_atomic(path, buf);
}

ModelParams load_checkpoint(const std::filesystem::path &path) {
  const std::string buf = binio::read_all(path, "checkpoint");
  const std::string where = path.string();
  if (buf.size() < sizeof kMagic + 4 + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw SchemaError(where + ": not a tcnimu checkpoint");

  const std::size_t body = buf.size() - 8;
  Cursor tail(buf, buf.size(), where, "checkpoint");
  tail.bytes(body);
  if (tail.get<std::uint64_t>() != fnv1a64(std::string_view(buf).substr(0, body)))
    throw SchemaError(where + ": checksum mismatch (file is corrupt or was modified)");

  Cursor c(buf, body, where, "checkpoint");
  c.bytes(sizeof kMagic);
  const auto version = c.get<std::uint32_t>();
  if (version != kVersion)
    throw SchemaError(where + ": unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = c.get<std::uint64_t>();
  if (cfg_len > c.remaining())
    throw SchemaError(where + ": checkpoint is truncated");
  nlohmann::json cfg_doc;
  try {
    cfg_doc = nlohmann::json::parse(c.bytes(cfg_len));
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(where + ": embedded config is not valid JSON: " + e.what());
  }
  ModelConfig config = ModelConfig::from_json(cfg_doc, where + " (embedded config)");

  const auto count = c.get<std::uint64_t>();
  if (count > c.remaining())
    throw SchemaError(where + ": implausible tensor count");
  std::vector<ParamTensor> params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = c.get<std::uint32_t>();
    std::string name = c.bytes(name_len);
    const auto rank = c.get<std::uint32_t>();
    if (rank > 8)
      throw SchemaError(where + ": tensor '" + name + "' has implausible rank");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto &d : shape) {
      d = c.get<std::uint64_t>();
      if (d != 0 && n > c.remaining() / d)
        throw SchemaError(where + ": tensor '" + name + "' shape exceeds the file");
      n *= d;
    }
    if (n > c.remaining() / 8)
      throw SchemaError(where + ": tensor '" + name + "' shape exceeds the file");
    std::vector<double> data(n);
    for (double &v : data)
      v = c.get<double>();
    params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (c.remaining() != 0)
    throw SchemaError(where + ": trailing bytes after the last tensor");
  try {
    return ModelParams(std::move(config), std::move(params));
  } catch (const SchemaError &e) {
    throw SchemaError(where + ": " + e.what());
  }
}

ModelParams load_checkpoint(const std::filesystem::path &path, const ModelConfig &expected) {
  ModelParams p = load_checkpoint(path);
  if (p.fingerprint() != expected.fingerprint())
    throw SchemaError(path.string() + ": checkpoint config fingerprint " + p.fingerprint() +
                      " does not match the requested model (fingerprint " + expected.fingerprint() + ")");
  return p;
}

} // namespace tcnimu
