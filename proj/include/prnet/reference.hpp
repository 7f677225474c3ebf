#pragma once

// Brute-force oracles used by the test and self-test suites. Nothing here
// shares code with the optimized operators it checks.

#include "prnet/ops.hpp"
#include "prnet/tensor.hpp"

namespace prnet::reference {

/// Deformable kernel warp evaluated literally: every output sample visits
/// every tap and weighs every source pixel with the bilinear tent
/// max(0, 1 - |dy|) * max(0, 1 - |dx|) at the clamped coordinate.
template <typename Scalar>
Tensor<Scalar> adacof_warp(const Tensor<Scalar>& padded_image, const Tensor<Scalar>& weights,
                           const Tensor<Scalar>& alpha, const Tensor<Scalar>& beta, int kernel_size, int dilation);

/// Direct 3x3 cross-correlation with padding 1.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      PadMode mode);

}  // namespace prnet::reference
