// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include <doctest.h>

#include <filesystem>
#include <cstring>
#include <fstream>
#include <iterator>

#include "support/finite_diff.hpp"
#include "tcnimu/error.hpp"
#include "tcnimu/hash.hpp"
#include "tcnimu/model.hpp"
#include "tcnimu/ops.hpp"

using namespace tcnimu;
using namespace tcnimu::testing;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(Fusion fusion, Head head) {
  ModelConfig c;
  c.grouping = LimbGrouping{{{"left", {0, 1}}, {"right", {2, 3}}}};
  c.channels = 4;
  c.window_len = 12;
  c.kernel_len = 3;
  c.filters = 8;
  c.branch_units = 16;
  c.fusion_units = 16;
  c.fusion = fusion;
  c.head = head;
  c.outputs = 3;
  return c;
}

// Scalar loss of a forward pass; train mode with a re-seeded rng so the
// dropout masks are identical on every call.
double loss_of(ModelParams &p, const Tensor &x, const std::vector<int> &labels, const Tensor &bits,
               bool backward) {
  Rng rng(99);
  ForwardResult f = forward(p, x, Mode::train, rng);
  if (p.config().head == Head::softmax) {
    auto l = ops::cross_entropy_loss(f.tape.value(f.logits), labels);
    if (backward)
      f.tape.backward(f.logits, l.grad);
    return l.loss;
  }
  auto l = ops::bce_loss(f.scores(), bits);
  if (backward)
    f.tape.backward(f.output, l.grad);
  return l.loss;
}

std::size_t closed_form_count(const ModelConfig &c) {
  const std::size_t k = c.kernel_len, F = c.filters, U = c.branch_units, H = c.fusion_units;
  const std::size_t t_out = c.window_len - c.conv_layers * (k - 1);
  std::size_t n = 0;
  for (const Limb &l : c.grouping.limbs) {
    n += k * l.channels.size() * F + F + (c.conv_layers - 1) * (k * F * F + F);
    n += c.fusion == Fusion::mlp ? t_out * F * U + U : 4 * U * (F + U + 1);
  }
  const std::size_t D = c.grouping.size() * U;
  if (c.fusion == Fusion::mlp)
    n += D * H + H + (c.fusion_layers - 1) * (H * H + H);
  else
    n += 4 * H * (D + H + 1) + (c.fusion_layers - 1) * 4 * H * (2 * H + 1);
  return n + H * c.outputs + c.outputs;
}

ModelConfig lara_config(Fusion fusion) {
  ModelConfig c;
  c.grouping = LimbGrouping::uniform(5, 6);
  c.channels = 30;
  c.outputs = 8;
  c.fusion = fusion;
  return c;
}

} // namespace

TEST_CASE("end-to-end gradients match finite differences") {
  for (Fusion fusion : {Fusion::mlp, Fusion::lstm})
    for (Head head : {Head::softmax, Head::sigmoid}) {
      CAPTURE(fusion_name(fusion));
      CAPTURE(head_name(head));
      Rng rng(5);
      ModelParams p = build(tiny_config(fusion, head), rng);
      // nonzero biases so their gradients are exercised away from the init point
      for (auto &t : p.params())
        if (t.value.rank() == 1)
          t.value = random_tensor(t.shape(), rng, -0.1, 0.1);
      const Tensor x = random_tensor({3, 12, 4}, rng);
      const std::vector<int> labels{0, 2, 1};
      const Tensor bits({3, 3}, {1, 0, 1, 0, 0, 1, 1, 1, 0});

      p.zero_grad();
      loss_of(p, x, labels, bits, true);
      for (ParamTensor &t : p.params()) {
        CAPTURE(t.name);
        const auto num = numeric_grad(t.value.storage(), [&] { return loss_of(p, x, labels, bits, false); });
        CHECK(relative_error(t.grad.storage(), num) < 1e-4);
      }
    }
}

TEST_CASE("parameter manifest and closed-form count") {
  for (Fusion fusion : {Fusion::mlp, Fusion::lstm}) {
    for (const ModelConfig &c : {tiny_config(fusion, Head::softmax), lara_config(fusion)})
      CHECK(param_count(c) == closed_form_count(c));
  }
  // LARa-style MLP: 5 branches of 4 conv layers, 84-frame maps into FC(256)
  CHECK(param_count(lara_config(Fusion::mlp)) == 5 * (5 * 6 * 64 + 64 + 3 * (5 * 64 * 64 + 64) +
                                                       84 * 64 * 256 + 256) +
                                                     1280 * 256 + 256 + 256 * 256 + 256 + 256 * 8 + 8);
  const auto names = param_manifest(tiny_config(Fusion::lstm, Head::sigmoid));
  CHECK(names.front().name == "branch.left.conv1.kernel");
  CHECK(names.front().shape == Shape{3, 2, 8});
  CHECK(names.back().name == "classifier.bias");
}

TEST_CASE("LARa-style config gives five branches and a 1280-wide concat") {
  ModelConfig c = lara_config(Fusion::mlp);
  c.filters = 4; // keep the forward cheap; widths that matter are unchanged
  Rng rng(1);
  ModelParams p = build(c, rng);
  ForwardResult f = forward(p, random_tensor({2, 100, 30}, rng), Mode::eval, rng);
  CHECK(f.branch_outputs.size() == 5);
  CHECK(f.tape.value(f.concat).shape() == Shape{2, 1280});
  CHECK(f.scores().shape() == Shape{2, 8});
}

TEST_CASE("config validation") {
  ModelConfig c = tiny_config(Fusion::mlp, Head::softmax);
  c.window_len = 16;
  c.kernel_len = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.window_len = 17;
  CHECK_NOTHROW(c.validate());
  c.outputs = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.head = Head::sigmoid;
  CHECK_NOTHROW(c.validate());
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const ModelConfig t = tiny_config(Fusion::lstm, Head::sigmoid);
  CHECK(ModelConfig::from_json(t.to_json(), "rt").to_json() == t.to_json());
  CHECK(ModelConfig::from_json(t.to_json(), "rt").fingerprint() == t.fingerprint());
  auto bad = t.to_json();
  bad["fusion"] = "attention";
  CHECK_THROWS_AS(ModelConfig::from_json(bad, "bad"), ConfigError);
  bad = t.to_json();
  bad["kernel_size"] = 3;
  CHECK_THROWS_AS(ModelConfig::from_json(bad, "bad"), ConfigError);
}

TEST_CASE("single-branch configuration") {
  ModelConfig c = tiny_config(Fusion::mlp, Head::softmax);
  c.grouping = LimbGrouping::single(4);
  Rng rng(3);
  ModelParams p = build(c, rng);
  ForwardResult f = forward(p, random_tensor({2, 12, 4}, rng), Mode::eval, rng);
  CHECK(f.branch_outputs.size() == 1);
  CHECK(f.tape.value(f.concat).shape() == Shape{2, 16});
}

TEST_CASE("forward properties") {
  Rng rng(8);
  for (Fusion fusion : {Fusion::mlp, Fusion::lstm}) {
    ModelParams p = build(tiny_config(fusion, Head::softmax), rng);
    const Tensor x = random_tensor({5, 12, 4}, rng, -3, 3);
    Rng a(1), b(2);
    const Tensor s1 = forward(p, x, Mode::eval, a).scores();
    const Tensor s2 = forward(p, x, Mode::eval, b).scores();
    CHECK(s1 == s2);
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0;
      for (std::size_t k = 0; k < 3; ++k)
        sum += s1.at(i, k);
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    for (auto &t : p.params())
      t.value.fill(0.0);
    const Tensor u = forward(p, x, Mode::eval, a).scores();
    for (double v : u.values())
      CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  ModelParams q = build(tiny_config(Fusion::mlp, Head::sigmoid), rng);
  const Tensor sig = forward(q, random_tensor({4, 12, 4}, rng, -50, 50), Mode::eval, rng).scores();
  for (double v : sig.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(forward(q, Tensor({1, 12, 5}), Mode::eval, rng), ConfigError);
}

TEST_CASE("branch independence") {
  Rng rng(4);
  for (Fusion fusion : {Fusion::mlp, Fusion::lstm}) {
    ModelParams p = build(tiny_config(fusion, Head::softmax), rng);
    const Tensor x = random_tensor({2, 12, 4}, rng);
    Tensor z = x;
    for (std::size_t i = 0; i < 2 * 12; ++i)
      z[i * 4 + 0] = z[i * 4 + 1] = 0.0; // zero the left limb
    const ForwardResult fx = forward(p, x, Mode::eval, rng);
    const ForwardResult fz = forward(p, z, Mode::eval, rng);
    CHECK(!(fx.tape.value(fx.branch_outputs[0]) == fz.tape.value(fz.branch_outputs[0])));
    CHECK(fx.tape.value(fx.branch_outputs[1]) == fz.tape.value(fz.branch_outputs[1]));
    // every recorded node of the right branch is untouched
    for (std::size_t id = 0; id < fx.tape.size(); ++id)
      if (fx.tape.node(id).label.rfind("branch.right", 0) == 0)
        CHECK(fx.tape.value(id) == fz.tape.value(id));
  }
}

TEST_CASE("permuting limbs in grouping and concat weights leaves outputs unchanged") {
  Rng rng(12);
  for (Fusion fusion : {Fusion::mlp, Fusion::lstm}) {
    ModelConfig c = tiny_config(fusion, Head::softmax);
    ModelParams p = build(c, rng);
    ModelConfig swapped = c;
    std::swap(swapped.grouping.limbs[0], swapped.grouping.limbs[1]);
    ModelParams q = build(swapped, rng);
    for (auto &t : q.params())
      t.value = p.get(t.name).value;
    // rows of the first fusion matrix follow the concat order
    const std::string w = fusion == Fusion::mlp ? "fusion.1.weight" : "fusion.1.w_ih";
    const Tensor &src = p.get(w).value;
    Tensor &dst = q.get(w).value;
    const std::size_t U = c.branch_units, cols = src.dim(1);
    for (std::size_t r = 0; r < 2 * U; ++r) {
      const std::size_t from = r < U ? r + U : r - U;
      for (std::size_t k = 0; k < cols; ++k)
        dst[r * cols + k] = src[from * cols + k];
    }
    const Tensor x = random_tensor({3, 12, 4}, rng);
    const Tensor a = forward(p, x, Mode::eval, rng).scores();
    const Tensor b = forward(q, x, Mode::eval, rng).scores();
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("tape replays the forward pass") {
  Rng rng(21);
  ModelParams p = build(tiny_config(Fusion::lstm, Head::softmax), rng);
  const ForwardResult f = forward(p, random_tensor({2, 12, 4}, rng), Mode::train, rng);
  CHECK(f.tape.replay_matches());
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "tcnimu_ckpt";
  fs::remove_all(dir);
  Rng rng(31);
  ModelParams p = build(tiny_config(Fusion::mlp, Head::sigmoid), rng);
  save_checkpoint(p, dir / "m.ckpt");
  ModelParams back = load_checkpoint(dir / "m.ckpt", p.config());
  CHECK(back.same_values(p));
  CHECK(back.fingerprint() == p.fingerprint());

  // bit-exact, including values that do not survive decimal printing
  p.get("classifier.bias").value[0] = 0.1 + 0.2;
  p.get("classifier.bias").value[1] = -0.0;
  save_checkpoint(p, dir / "m.ckpt");
  back = load_checkpoint(dir / "m.ckpt");
  CHECK(std::signbit(back.get("classifier.bias").value[1]));
  CHECK(back.get("classifier.bias").value[0] == 0.1 + 0.2);

  ModelConfig other = p.config();
  other.fusion_units = 8;
  try {
    load_checkpoint(dir / "m.ckpt", other);
    FAIL("expected fingerprint error");
  } catch (const SchemaError &e) {
    CHECK(std::string(e.what()).find(other.fingerprint()) != std::string::npos);
  }

  std::string bytes;
  {
    std::ifstream in(dir / "m.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string &b) {
    std::ofstream(dir / "t.ckpt", std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  // first dimension of the first tensor: after magic, version, config, count, name, rank
  const std::uint64_t cfg_len = *reinterpret_cast<const std::uint64_t *>(bytes.data() + 12);
  const std::size_t name_len = *reinterpret_cast<const std::uint32_t *>(bytes.data() + 20 + cfg_len + 8);
  const std::size_t dim0 = 20 + cfg_len + 8 + 4 + name_len + 4;
  std::string tampered = bytes;
  tampered[dim0] = 4; // kernel length 3 -> 4
  write(tampered);
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), SchemaError);
  // even with a recomputed checksum the shape no longer matches the config
  const std::uint64_t sum = fnv1a64(std::string_view(tampered).substr(0, tampered.size() - 8));
  std::memcpy(tampered.data() + tampered.size() - 8, &sum, 8);
  write(tampered);
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), SchemaError);

  write(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), SchemaError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}
