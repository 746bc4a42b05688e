// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tcnimu/detail/eigen_map.hpp"

namespace tcnimu::ops {

using detail::cmat;
using detail::mat;

namespace {

void require_rank(const Tensor &t, std::size_t rank, const char *what) {
  if (t.rank() != rank)
    throw ConfigError(std::string(what) + ": expected rank " + std::to_string(rank) +
                      ", got shape " + shape_str(t.shape()));
}

struct ConvDims {
  std::size_t batch, time, in, k, out, out_time;
};

ConvDims conv_dims(const Tensor &input, const Tensor &kernel) {
  require_rank(input, 3, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  ConvDims d{input.dim(0), input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(2), 0};
  if (d.k < 1)
    throw ConfigError("conv1d: kernel length must be >= 1");
  if (kernel.dim(1) != d.in)
    throw ConfigError("conv1d: kernel expects " + std::to_string(kernel.dim(1)) +
                      " input channels, input has " + std::to_string(d.in));
  if (d.time < d.k)
    throw ConfigError("conv1d: input time " + std::to_string(d.time) +
                      " shorter than kernel " + std::to_string(d.k));
  d.out_time = d.time - d.k + 1;
  return d;
}

} // namespace

// The k*in values feeding output frame t are contiguous in a row-major
// [time, in] slab, so the im2col matrix is a strided view with row stride `in`.
Tensor conv1d_forward(const Tensor &input, const Tensor &kernel, const Tensor &bias) {
  const ConvDims d = conv_dims(input, kernel);
  require_shape(bias, {d.out}, "conv1d bias");
  Tensor out({d.batch, d.out_time, d.out});
  const auto w = cmat(kernel.data(), d.k * d.in, d.out);
  const auto b = detail::ConstVecMap(bias.data(), d.out);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const auto cols = cmat(input.data() + n * d.time * d.in, d.out_time, d.k * d.in, d.in);
    auto y = mat(out.data() + n * d.out_time * d.out, d.out_time, d.out);
    y.noalias() = cols * w;
    y.rowwise() += b;
  }
  require_finite(out, "conv1d_forward");
  return out;
}

Tensor conv1d_backward_input(const Tensor &kernel, const Tensor &upstream, std::size_t time) {
  require_rank(upstream, 3, "conv1d upstream");
  const std::size_t batch = upstream.dim(0), out_time = upstream.dim(1), out = upstream.dim(2);
  const std::size_t k = kernel.dim(0), in = kernel.dim(1);
  if (kernel.dim(2) != out || out_time + k - 1 != time)
    throw StateError("conv1d_backward: upstream " + shape_str(upstream.shape()) +
                     " does not match kernel " + shape_str(kernel.shape()));
  Tensor dx({batch, time, in});
  const auto w = cmat(kernel.data(), k * in, out);
  detail::RowMat g(out_time, k * in);
  for (std::size_t n = 0; n < batch; ++n) {
    g.noalias() = cmat(upstream.data() + n * out_time * out, out_time, out) * w.transpose();
    double *base = dx.data() + n * time * in;
    for (std::size_t t = 0; t < out_time; ++t) {
      double *dst = base + t * in;
      const double *src = g.data() + t * k * in;
      for (std::size_t j = 0; j < k * in; ++j)
        dst[j] += src[j];
    }
  }
  return dx;
}

Conv1dGrads conv1d_backward(const Tensor &input, const Tensor &kernel, const Tensor &upstream) {
  const ConvDims d = conv_dims(input, kernel);
  require_shape(upstream, {d.batch, d.out_time, d.out}, "conv1d upstream");
  Conv1dGrads g;
  g.kernel = Tensor({d.k, d.in, d.out});
  g.bias = Tensor({d.out});
  auto dw = mat(g.kernel.data(), d.k * d.in, d.out);
  auto db = detail::VecMap(g.bias.data(), d.out);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const auto cols = cmat(input.data() + n * d.time * d.in, d.out_time, d.k * d.in, d.in);
    const auto dy = cmat(upstream.data() + n * d.out_time * d.out, d.out_time, d.out);
    dw.noalias() += cols.transpose() * dy;
    db += dy.colwise().sum();
  }
  g.input = conv1d_backward_input(kernel, upstream, d.time);
  return g;
}

Tensor linear_forward(const Tensor &input, const Tensor &weight, const Tensor &bias) {
  require_rank(input, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  const std::size_t batch = input.dim(0), in = input.dim(1), out = weight.dim(1);
  if (weight.dim(0) != in)
    throw ConfigError("linear: weight " + shape_str(weight.shape()) + " cannot consume " +
                      std::to_string(in) + " features");
  require_shape(bias, {out}, "linear bias");
  Tensor y({batch, out});
  auto ym = mat(y.data(), batch, out);
  ym.noalias() = cmat(input.data(), batch, in) * cmat(weight.data(), in, out);
  ym.rowwise() += detail::ConstVecMap(bias.data(), out);
  require_finite(y, "linear_forward");
  return y;
}

Tensor linear_backward_input(const Tensor &weight, const Tensor &upstream) {
  const std::size_t batch = upstream.dim(0), in = weight.dim(0), out = weight.dim(1);
  if (upstream.dim(1) != out)
    throw StateError("linear_backward: upstream " + shape_str(upstream.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  Tensor dx({batch, in});
  mat(dx.data(), batch, in).noalias() =
      cmat(upstream.data(), batch, out) * cmat(weight.data(), in, out).transpose();
  return dx;
}

LinearGrads linear_backward(const Tensor &input, const Tensor &weight, const Tensor &upstream) {
  const std::size_t batch = input.dim(0), in = input.dim(1), out = weight.dim(1);
  require_shape(upstream, {batch, out}, "linear upstream");
  LinearGrads g;
  g.weight = Tensor({in, out});
  g.bias = Tensor({out});
  const auto dy = cmat(upstream.data(), batch, out);
  mat(g.weight.data(), in, out).noalias() = cmat(input.data(), batch, in).transpose() * dy;
  detail::VecMap(g.bias.data(), out) = dy.colwise().sum();
  g.input = linear_backward_input(weight, upstream);
  return g;
}

Tensor relu(const Tensor &x) {
  Tensor y = x;
  for (double &v : y.storage())
    v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor &output, const Tensor &upstream) {
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(output[i] > 0.0))
      g[i] = 0.0;
  return g;
}

namespace {

constexpr double kSigmoidLo = std::numeric_limits<double>::min();
constexpr double kSigmoidHi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

double logistic(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, kSigmoidLo, kSigmoidHi);
}

} // namespace

Tensor sigmoid(const Tensor &x) {
  Tensor y = x;
  for (double &v : y.storage())
    v = logistic(v);
  return y;
}

Tensor sigmoid_backward(const Tensor &output, const Tensor &upstream) {
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] *= output[i] * (1.0 - output[i]);
  return g;
}

Tensor tanh(const Tensor &x) {
  Tensor y = x;
  for (double &v : y.storage())
    v = std::tanh(v);
  return y;
}

Tensor softmax(const Tensor &x) {
  require_rank(x, 2, "softmax input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor y({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double *in = x.data() + r * cols;
    double *out = y.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c)
      out[c] /= sum;
  }
  return y;
}

Tensor softmax_backward(const Tensor &output, const Tensor &upstream) {
  const std::size_t rows = output.dim(0), cols = output.dim(1);
  Tensor g({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double *y = output.data() + r * cols;
    const double *u = upstream.data() + r * cols;
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      dot += y[c] * u[c];
    for (std::size_t c = 0; c < cols; ++c)
      g[r * cols + c] = y[c] * (u[c] - dot);
  }
  return g;
}

Tensor dropout_mask(const Shape &shape, double p, Rng &rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
  Tensor mask(shape, 1.0);
  if (p == 0.0)
    return mask;
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (double &m : mask.storage())
    m = keep(rng) ? scale : 0.0;
  return mask;
}

Tensor dropout(const Tensor &input, double p, Mode mode, Rng &rng, Tensor *mask_out) {
  if (mode == Mode::eval || p == 0.0) {
    if (!(p >= 0.0 && p < 1.0))
      throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
    if (mask_out)
      *mask_out = Tensor(input.shape(), 1.0);
    return input;
  }
  Tensor mask = dropout_mask(input.shape(), p, rng);
  Tensor out = multiply(input, mask);
  if (mask_out)
    *mask_out = std::move(mask);
  return out;
}

Tensor multiply(const Tensor &a, const Tensor &b) {
  if (!a.same_shape(b))
    throw ConfigError("multiply: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= b[i];
  return out;
}

LossResult cross_entropy_loss(const Tensor &logits, std::span<const int> targets) {
  require_rank(logits, 2, "cross_entropy logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch)
    throw ConfigError("cross_entropy: " + std::to_string(targets.size()) + " targets for batch " +
                      std::to_string(batch));
  LossResult r;
  r.grad = softmax(logits);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int t = targets[b];
    if (t < 0 || static_cast<std::size_t>(t) >= classes)
      throw ConfigError("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                        std::to_string(classes) + ")");
    const double *z = logits.data() + b * classes;
    const double mx = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c)
      sum += std::exp(z[c] - mx);
    total += (std::log(sum) + mx) - z[t];
    r.grad[b * classes + static_cast<std::size_t>(t)] -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(batch);
  for (double &g : r.grad.storage())
    g *= inv;
  r.loss = total * inv;
  if (!std::isfinite(r.loss))
    throw NumericError("cross_entropy_loss is not finite");
  return r;
}

LossResult bce_loss(const Tensor &probs, const Tensor &targets) {
  if (!probs.same_shape(targets))
    throw ConfigError("bce: probs " + shape_str(probs.shape()) + " vs targets " +
                      shape_str(targets.shape()));
  if (probs.empty())
    throw ConfigError("bce: empty batch");
  LossResult r;
  r.grad = Tensor(probs.shape());
  const double inv = 1.0 / static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double raw = probs[i];
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const double t = targets[i];
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    const bool clamped = raw < kBceClamp || raw > 1.0 - kBceClamp;
    r.grad[i] = clamped ? 0.0 : (-t / p + (1.0 - t) / (1.0 - p)) * inv;
  }
  r.loss = total * inv;
  if (!std::isfinite(r.loss))
    throw NumericError("bce_loss is not finite");
  return r;
}

} // namespace tcnimu::ops
