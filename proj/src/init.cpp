// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/init.hpp"

#include <cmath>

namespace tcnimu {

namespace {

// Orthonormalizes the rows of a [n, m] row-major block (n <= m) with modified
// Gram-Schmidt, run twice for numerical orthogonality.
void orthonormalize_rows(std::vector<double> &a, std::size_t n, std::size_t m, Rng &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double *ri = a.data() + i * m;
    for (int attempt = 0;; ++attempt) {
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t j = 0; j < i; ++j) {
          const double *rj = a.data() + j * m;
          double dot = 0.0;
          for (std::size_t c = 0; c < m; ++c)
            dot += ri[c] * rj[c];
          for (std::size_t c = 0; c < m; ++c)
            ri[c] -= dot * rj[c];
        }
      double norm = 0.0;
      for (std::size_t c = 0; c < m; ++c)
        norm += ri[c] * ri[c];
      norm = std::sqrt(norm);
      if (norm > 1e-10) {
        for (std::size_t c = 0; c < m; ++c)
          ri[c] /= norm;
        break;
      }
      if (attempt > 8)
        throw NumericError("orthogonal_init: could not draw an independent row");
      for (std::size_t c = 0; c < m; ++c)
        ri[c] = normal(rng);
    }
  }
}

} // namespace

Tensor orthogonal_init(const Shape &shape, double gain, Rng &rng) {
  if (shape.empty() || shape_size(shape) == 0)
    throw ConfigError("orthogonal_init: empty shape " + shape_str(shape));
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out(shape);
  if (shape.size() == 1) {
    std::vector<double> v(shape[0]);
    for (double &x : v)
      x = normal(rng);
    orthonormalize_rows(v, 1, v.size(), rng);
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = gain * v[i];
    return out;
  }
  const std::size_t cols = shape.back();
  const std::size_t rows = shape_size(shape) / cols;
  const std::size_t n = std::min(rows, cols), m = std::max(rows, cols);
  std::vector<double> q(n * m);
  for (double &x : q)
    x = normal(rng);
  orthonormalize_rows(q, n, m, rng);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = gain * (rows <= cols ? q[r * m + c] : q[c * m + r]);
  return out;
}

} // namespace tcnimu
