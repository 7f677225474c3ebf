#pragma once

#include <vector>

#include "prnet/autograd.hpp"

namespace prnet {

enum class PadMode { zeros, replicate };

// Differentiable operators. Shapes must match exactly; the only broadcast is
// the per-channel bias add inside conv2d.

/// 3x3 stride-1 cross-correlation. `weight` is [Cout,Cin,3,3], `bias` holds
/// Cout values. Only padding = 1 (same-size output) is supported; border
/// samples are zeros or replicated edge pixels according to `mode`.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   int padding = 1, PadMode mode = PadMode::zeros);

/// Non-overlapping 2x2 mean pooling. H and W must be even.
template <typename Scalar>
Var<Scalar> avg_pool2(const Var<Scalar>& input);

/// x2 bilinear upsampling, half-pixel centres, edge clamped.
template <typename Scalar>
Var<Scalar> upsample_bilinear2(const Var<Scalar>& input);

/// Counter-clockwise rotation of the (H,W) plane by 90 degrees per quarter turn.
template <typename Scalar>
Var<Scalar> rot90(const Var<Scalar>& input, int quarter_turns);

/// Softmax across channels at every (n,h,w).
template <typename Scalar>
Var<Scalar> channel_softmax(const Var<Scalar>& input);

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& input);

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& input);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> replication_pad(const Var<Scalar>& input, int left, int right, int top, int bottom);

/// Spatial window [top, top+height) x [left, left+width).
template <typename Scalar>
Var<Scalar> crop(const Var<Scalar>& input, std::int64_t top, std::int64_t left, std::int64_t height,
                 std::int64_t width);

/// Mean absolute error as a single-element tensor. Subgradient 0 at ties.
template <typename Scalar>
Var<Scalar> l1_loss(const Var<Scalar>& prediction, const Var<Scalar>& target);

/// Concatenation along the channel axis.
template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& inputs);

/// Sum of all elements as a single-element tensor.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& input);

}  // namespace prnet
