// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <Eigen/Core>

namespace tcnimu::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Stride = Eigen::OuterStride<>;
using MatMap = Eigen::Map<RowMat, 0, Stride>;
using ConstMatMap = Eigen::Map<const RowMat, 0, Stride>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

inline MatMap mat(double *p, Eigen::Index rows, Eigen::Index cols, Eigen::Index stride) {
  return MatMap(p, rows, cols, Stride(stride));
}
inline MatMap mat(double *p, Eigen::Index rows, Eigen::Index cols) {
  return mat(p, rows, cols, cols);
}
inline ConstMatMap cmat(const double *p, Eigen::Index rows, Eigen::Index cols,
                        Eigen::Index stride) {
  return ConstMatMap(p, rows, cols, Stride(stride));
}
inline ConstMatMap cmat(const double *p, Eigen::Index rows, Eigen::Index cols) {
  return cmat(p, rows, cols, cols);
}

} // namespace tcnimu::detail
