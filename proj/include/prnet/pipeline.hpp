#pragma once

#include "prnet/image.hpp"
#include "prnet/model.hpp"

namespace prnet {

/// occlusion * warped1 + (1 - occlusion) * warped2, with the one-channel
/// occlusion map shared by every colour channel.
template <typename Scalar>
Var<Scalar> blend(const Var<Scalar>& warped1, const Var<Scalar>& warped2, const Var<Scalar>& occlusion);

/// Intermediate results of one synthesis pass, at the padded resolution.
template <typename Scalar>
struct Synthesis {
  Var<Scalar> frame;  // cropped back to the input size, not quantized
  KernelField<Scalar> field;
  std::int64_t padded_height = 0;
  std::int64_t padded_width = 0;
};

/// Differentiable midpoint synthesis on [N,3,H,W] frames in [0,1].
///
/// Frames are edge-replicated up to the model's size multiple, passed through
/// forward_features, padded again by the warp's kernel radius, warped, blended
/// and cropped back to H x W. No clamping or quantization is applied.
template <typename Scalar>
Synthesis<Scalar> synthesize(const Model<Scalar>& model, const Var<Scalar>& frame1, const Var<Scalar>& frame2,
                             FeatureTrace<Scalar>* trace = nullptr);

/// Interpolates the midpoint of two 8-bit frames with gradient recording disabled.
template <typename Scalar>
Image interpolate(const Model<Scalar>& model, const Image& frame1, const Image& frame2);

/// Smallest multiple of `multiple` that is >= value.
std::int64_t round_up(std::int64_t value, std::int64_t multiple);

}  // namespace prnet
