// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include <doctest.h>

#include <cmath>

#include "support/finite_diff.hpp"
#include "tcnimu/error.hpp"
#include "tcnimu/explain.hpp"

using namespace tcnimu;
using namespace tcnimu::testing;

namespace {

ModelConfig one_branch(std::size_t channels) {
  ModelConfig c;
  c.grouping = LimbGrouping::single(channels);
  c.channels = channels;
  c.window_len = 14;
  c.kernel_len = 3;
  c.filters = 5;
  c.branch_units = 9;
  c.fusion_units = 7;
  c.outputs = 4;
  return c;
}

double sum(const Tensor &t) {
  double s = 0;
  for (double v : t.values())
    s += v;
  return s;
}

} // namespace

TEST_CASE("single linear path conserves the score") {
  OpTape t;
  ParamTensor w("w", Tensor({1, 1}, {2.5})), b("b", Tensor({1}));
  const VarId x = t.input(Tensor({1, 1}, {1.2}));
  const VarId y = t.linear(x, w, b);
  const auto r = lrp_propagate(t, y, t.value(y), x);
  CHECK(r.relevance[0] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("two-input hand example") {
  OpTape t;
  ParamTensor w("w", Tensor({2, 1}, {2.0, 1.0})), b("b", Tensor({1}));
  const VarId x = t.input(Tensor({1, 2}, {1.0, 1.0}));
  const VarId y = t.linear(x, w, b);
  const double score = t.value(y)[0];
  CHECK(score == 3.0);
  const auto r = lrp_propagate(t, y, t.value(y), x, 1e-9);
  CHECK(std::abs(r.relevance[0] - 2.0 / 3.0 * score) < 1e-6);
  CHECK(std::abs(r.relevance[1] - 1.0 / 3.0 * score) < 1e-6);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].relevance_out == score);
}

TEST_CASE("dead ReLU unit receives no relevance") {
  OpTape t;
  // hidden unit 0 is active, unit 1 is dead (pre-activation -1)
  ParamTensor w1("w1", Tensor({2, 2}, {1.0, -1.0, 0.5, 0.0})), b1("b1", Tensor({2}));
  ParamTensor w2("w2", Tensor({2, 1}, {1.0, 3.0})), b2("b2", Tensor({1}));
  const VarId x = t.input(Tensor({1, 2}, {1.0, 2.0}));
  const VarId h = t.linear(x, w1, b1);
  const VarId a = t.relu(h);
  const VarId y = t.linear(a, w2, b2);
  CHECK(t.value(h)[1] == -1.0);
  const auto r = lrp_propagate(t, y, t.value(y), h);
  CHECK(r.relevance[1] == 0.0);
  CHECK(r.relevance[0] == doctest::Approx(t.value(y)[0]));
}

TEST_CASE("disconnected channel gets exactly zero relevance") {
  Rng rng(3);
  ModelParams p = build(one_branch(4), rng);
  Tensor &k = p.get("branch.all.conv1.kernel").value; // [k, in, out]
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t o = 0; o < 5; ++o)
      k[(i * 4 + 2) * 5 + o] = 0.0;
  const Tensor x = random_tensor({14, 4}, rng);
  for (std::size_t target = 0; target < 4; ++target) {
    const RelevanceMap m = lrp_explain(p, x, target);
    for (std::size_t t = 0; t < 14; ++t)
      CHECK(m.relevance.at(t, 2) == 0.0);
  }
}

TEST_CASE("layer-wise near-conservation on random conv/MLP networks") {
  Rng rng(77);
  int layers_checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig c = one_branch(3);
    if (trial % 2) {
      c.grouping = LimbGrouping{{{"a", {0}}, {"b", {1, 2}}}};
    }
    ModelParams p = build(c, rng);
    for (auto &t : p.params())
      if (t.value.rank() == 1)
        t.value = random_tensor(t.shape(), rng, -0.05, 0.05);
    const Tensor x = random_tensor({14, 3}, rng, -2, 2);
    const std::size_t target = static_cast<std::size_t>(trial) % 4;
    const RelevanceMap m = lrp_explain(p, x, target, 1e-9);
    CHECK(m.relevance.shape() == Shape{14, 3});
    double absorbed = 0.0;
    for (const LayerTrace &l : m.trace) {
      CAPTURE(l.label);
      const double denom = std::abs(l.relevance_out);
      if (denom < 1e-9)
        continue; // nothing reached this layer
      CHECK(std::abs(l.relevance_in + l.bias_share - l.relevance_out) / denom <= 1e-3);
      // without the bias share the same relation holds only up to that share
      CHECK(std::abs(l.relevance_in + l.bias_share + l.stabilizer_share - l.relevance_out) <=
            1e-9 * std::max(1.0, denom));
      absorbed += l.bias_share + l.stabilizer_share;
      ++layers_checked;
    }
    CHECK(sum(m.relevance) + absorbed == doctest::Approx(m.score).epsilon(1e-8));
  }
  CHECK(layers_checked > 100);
}

TEST_CASE("LSTM fusion is rejected") {
  ModelConfig c = one_branch(2);
  c.fusion = Fusion::lstm;
  Rng rng(1);
  ModelParams p = build(c, rng);
  CHECK_THROWS_AS(lrp_explain(p, Tensor({14, 2}), 0), ConfigError);
  ModelParams q = build(one_branch(2), rng);
  CHECK_THROWS_AS(lrp_explain(q, Tensor({14, 2}), 9), ConfigError);
}

TEST_CASE("positive RMS per limb") {
  RelevanceMap m;
  m.relevance = Tensor({3, 5});
  const LimbGrouping g{{{"a", {0, 1, 2}}, {"b", {3, 4}}}};
  m.relevance.at(1, 1) = 3.0;
  for (std::size_t t = 0; t < 3; ++t) {
    m.relevance.at(t, 3) = -1.0 - static_cast<double>(t);
    m.relevance.at(t, 4) = -0.5;
  }
  auto rms = positive_rms_per_limb(m, g);
  CHECK(rms[0] == doctest::Approx(1.0));
  CHECK(rms[1] == 0.0);

  Rng rng(2);
  m.relevance = random_tensor({6, 5}, rng);
  rms = positive_rms_per_limb(m, g);
  RelevanceMap doubled = m;
  for (double &v : doubled.relevance.storage())
    v *= 2;
  const auto rms2 = positive_rms_per_limb(doubled, g);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(rms2[i] == doctest::Approx(2 * rms[i]));
  const LimbGrouping permuted{{{"a", {2, 0, 1}}, {"b", {4, 3}}}};
  const auto rms3 = positive_rms_per_limb(m, permuted);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(rms3[i] == doctest::Approx(rms[i]).epsilon(1e-15));
}

TEST_CASE("relevance export") {
  Rng rng(4);
  ModelParams p = build(one_branch(2), rng);
  const RelevanceMap m = lrp_explain(p, random_tensor({14, 2}, rng), 1);
  const std::string csv = relevance_csv(m, {"x", "y"});
  CHECK(csv.rfind("frame,channel_name,relevance\n0,x,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 28);
  const auto j = relevance_summary(m, LimbGrouping::single(2));
  CHECK(j["limbs"].size() == 1);
  CHECK(j["target"] == 1);
  CHECK_THROWS_AS(relevance_csv(m, {"x"}), ConfigError);
}
