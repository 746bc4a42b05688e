// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include "tcnimu/rng.hpp"
#include "tcnimu/tensor.hpp"

namespace tcnimu {

// Orthogonal initialization.
//
// The tensor is viewed as a matrix [prod(leading axes), last axis], i.e.
// [fan_in, fan_out] for every weight layout in this library. The smaller
// side receives orthonormal vectors scaled by `gain`: W W^T = gain^2 I when
// rows <= cols, W^T W = gain^2 I otherwise. Rank-1 tensors become a random
// vector of norm `gain`.
Tensor orthogonal_init(const Shape &shape, double gain, Rng &rng);

} // namespace tcnimu
