// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/lstm.hpp"

#include <cmath>

#include "tcnimu/detail/eigen_map.hpp"
#include "tcnimu/ops.hpp"

namespace tcnimu::ops {

using detail::cmat;
using detail::mat;

namespace {

double sigm(double x) {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

LstmResult lstm_forward(const Tensor &input, const Tensor &w_ih, const Tensor &w_hh,
                        const Tensor &bias, const LstmState *state0) {
  if (input.rank() != 3)
    throw ConfigError("lstm input must be [batch, time, features], got " +
                      shape_str(input.shape()));
  const std::size_t batch = input.dim(0), time = input.dim(1), feat = input.dim(2);
  const std::size_t hidden = w_hh.dim(0), g4 = 4 * hidden;
  require_shape(w_ih, {feat, g4}, "lstm w_ih");
  require_shape(w_hh, {hidden, g4}, "lstm w_hh");
  require_shape(bias, {g4}, "lstm bias");
  if (time == 0)
    throw ConfigError("lstm: empty sequence");

  LstmResult r;
  LstmCache &cache = r.cache;
  cache.input = input;
  cache.h0 = state0 ? state0->h : Tensor({batch, hidden});
  cache.c0 = state0 ? state0->c : Tensor({batch, hidden});
  require_shape(cache.h0, {batch, hidden}, "lstm h0");
  require_shape(cache.c0, {batch, hidden}, "lstm c0");
  cache.gates = Tensor({batch, time, g4});
  cache.cells = Tensor({batch, time, hidden});
  cache.tanh_c = Tensor({batch, time, hidden});
  cache.hidden = Tensor({batch, time, hidden});

  // Input projections for every (batch, time) row at once.
  mat(cache.gates.data(), batch * time, g4).noalias() =
      cmat(input.data(), batch * time, feat) * cmat(w_ih.data(), feat, g4);
  const auto b = detail::ConstVecMap(bias.data(), g4);
  const auto whh = cmat(w_hh.data(), hidden, g4);

  for (std::size_t t = 0; t < time; ++t) {
    auto a = mat(cache.gates.data() + t * g4, batch, g4, time * g4);
    if (t == 0)
      a.noalias() += cmat(cache.h0.data(), batch, hidden) * whh;
    else
      a.noalias() += cmat(cache.hidden.data() + (t - 1) * hidden, batch, hidden, time * hidden) * whh;
    a.rowwise() += b;
    for (std::size_t n = 0; n < batch; ++n) {
      double *gate = cache.gates.data() + (n * time + t) * g4;
      const double *c_prev =
          t == 0 ? cache.c0.data() + n * hidden : cache.cells.data() + (n * time + t - 1) * hidden;
      double *c = cache.cells.data() + (n * time + t) * hidden;
      double *tc = cache.tanh_c.data() + (n * time + t) * hidden;
      double *h = cache.hidden.data() + (n * time + t) * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const double i_g = sigm(gate[j]);
        const double f_g = sigm(gate[hidden + j]);
        const double g_g = std::tanh(gate[2 * hidden + j]);
        const double o_g = sigm(gate[3 * hidden + j]);
        gate[j] = i_g;
        gate[hidden + j] = f_g;
        gate[2 * hidden + j] = g_g;
        gate[3 * hidden + j] = o_g;
        c[j] = f_g * c_prev[j] + i_g * g_g;
        tc[j] = std::tanh(c[j]);
        h[j] = o_g * tc[j];
      }
    }
  }
  require_finite(cache.cells, "lstm_forward cell state");
  require_finite(cache.hidden, "lstm_forward hidden state");

  r.outputs = cache.hidden;
  r.final_state.h = Tensor({batch, hidden});
  r.final_state.c = Tensor({batch, hidden});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t j = 0; j < hidden; ++j) {
      r.final_state.h[n * hidden + j] = cache.hidden[(n * time + time - 1) * hidden + j];
      r.final_state.c[n * hidden + j] = cache.cells[(n * time + time - 1) * hidden + j];
    }
  return r;
}

LstmGrads lstm_backward(const LstmCache &cache, const Tensor &w_ih, const Tensor &w_hh,
                        const Tensor &d_outputs, const LstmState *d_final) {
  const std::size_t batch = cache.input.dim(0), time = cache.input.dim(1),
                    feat = cache.input.dim(2);
  const std::size_t hidden = w_hh.dim(0), g4 = 4 * hidden;
  require_shape(d_outputs, {batch, time, hidden}, "lstm d_outputs");

  LstmGrads g;
  g.w_hh = Tensor({hidden, g4});
  g.bias = Tensor({g4});
  Tensor d_gates({batch, time, g4}); // pre-activation gradients

  Tensor dh_next({batch, hidden});
  Tensor dc_next({batch, hidden});
  if (d_final) {
    dh_next = d_final->h;
    dc_next = d_final->c;
  }
  const auto whh = cmat(w_hh.data(), hidden, g4);
  auto dwhh = mat(g.w_hh.data(), hidden, g4);
  auto db = detail::VecMap(g.bias.data(), g4);

  for (std::size_t tt = time; tt-- > 0;) {
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t row = n * time + tt;
      const double *gate = cache.gates.data() + row * g4;
      const double *tc = cache.tanh_c.data() + row * hidden;
      const double *c_prev =
          tt == 0 ? cache.c0.data() + n * hidden : cache.cells.data() + (row - 1) * hidden;
      const double *dout = d_outputs.data() + row * hidden;
      double *dh = dh_next.data() + n * hidden;
      double *dc = dc_next.data() + n * hidden;
      double *da = d_gates.data() + row * g4;
      for (std::size_t j = 0; j < hidden; ++j) {
        const double i_g = gate[j], f_g = gate[hidden + j], g_g = gate[2 * hidden + j],
                     o_g = gate[3 * hidden + j];
        const double dhj = dout[j] + dh[j];
        const double dcj = dhj * o_g * (1.0 - tc[j] * tc[j]) + dc[j];
        da[j] = dcj * g_g * i_g * (1.0 - i_g);
        da[hidden + j] = dcj * c_prev[j] * f_g * (1.0 - f_g);
        da[2 * hidden + j] = dcj * i_g * (1.0 - g_g * g_g);
        da[3 * hidden + j] = dhj * tc[j] * o_g * (1.0 - o_g);
        dc[j] = dcj * f_g;
      }
    }
    const auto da = cmat(d_gates.data() + tt * g4, batch, g4, time * g4);
    if (tt == 0)
      dwhh.noalias() += cmat(cache.h0.data(), batch, hidden).transpose() * da;
    else
      dwhh.noalias() +=
          cmat(cache.hidden.data() + (tt - 1) * hidden, batch, hidden, time * hidden).transpose() * da;
    db += da.colwise().sum();
    mat(dh_next.data(), batch, hidden).noalias() = da * whh.transpose();
  }

  const auto dall = cmat(d_gates.data(), batch * time, g4);
  g.w_ih = Tensor({feat, g4});
  mat(g.w_ih.data(), feat, g4).noalias() = cmat(cache.input.data(), batch * time, feat).transpose() * dall;
  g.input = Tensor({batch, time, feat});
  mat(g.input.data(), batch * time, feat).noalias() = dall * cmat(w_ih.data(), feat, g4).transpose();
  g.state0.h = std::move(dh_next);
  g.state0.c = std::move(dc_next);
  return g;
}

} // namespace tcnimu::ops
