#pragma once

#include "prnet/autograd.hpp"

namespace prnet {

/// Tap grid of the adaptive collaboration-of-flows warp.
struct WarpGeometry {
  int kernel_size = 5;  // odd, >= 1
  int dilation = 1;     // >= 1

  int taps() const { return kernel_size * kernel_size; }
  /// Replication padding the source image must carry on every side.
  int padding() const { return dilation * (kernel_size - 1) / 2; }
  void validate(const char* op) const;
};

/// Per-pixel warp parameters, each [N, F*F, H, W]. Channel t = k*F + l
/// addresses tap (k, l); alpha displaces rows, beta displaces columns.
template <typename Scalar>
struct WarpParams {
  Var<Scalar> weights;
  Var<Scalar> alpha;
  Var<Scalar> beta;
  WarpGeometry geometry{};
};

/// Deformable kernel warp.
///
///   out(n,c,i,j) = sum_{k,l} W_t(i,j) * S(I, c, i + d*k + alpha_t(i,j), j + d*l + beta_t(i,j))
///
/// `padded_image` is [N,C,H+2p,W+2p] with p = geometry.padding(), already
/// replication padded. S is bilinear sampling with the coordinate clamped to
/// the padded image. Differentiable in the image, weights and both offset
/// fields; at integer coordinates the right-sided derivative is used and a
/// clamped coordinate has zero derivative.
template <typename Scalar>
Var<Scalar> adacof_warp(const Var<Scalar>& padded_image, const WarpParams<Scalar>& params);

/// Throws unless the warp operand shapes agree.
void check_warp_shapes(const Shape& padded_image, const Shape& weights, const Shape& alpha, const Shape& beta,
                       const WarpGeometry& geometry, const char* op);

}  // namespace prnet
