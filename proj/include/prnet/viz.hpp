#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prnet/image.hpp"
#include "prnet/model.hpp"

namespace prnet {

using Rgb = std::array<std::uint8_t, 3>;

/// Piecewise-linear colour ramp over [0,1]; inputs outside are clamped.
class ColorRamp {
 public:
  /// Stops sorted by position, first at 0 and last at 1.
  explicit ColorRamp(std::vector<std::pair<double, Rgb>> stops);

  Rgb operator()(double t) const;

  /// Blue at 0 (frame 2 carries the pixel), green at 0.5, red at 1 (frame 1 carries it).
  static ColorRamp occlusion();
  /// Blue for low attention, red for high.
  static ColorRamp attention();

 private:
  std::vector<std::pair<double, Rgb>> stops_;
};

/// Human-readable key for render_occlusion colours.
std::string occlusion_legend();

/// Colours a [1,1,H,W] occlusion map. Values outside [0,1] are clamped and
/// reported on stderr.
template <typename Scalar>
Image render_occlusion(const Tensor<Scalar>& occlusion);

/// Occlusion map of the synthesized midpoint, cropped to the frame size: [1,1,H,W].
template <typename Scalar>
Tensor<Scalar> occlusion_map(const Model<Scalar>& model, const Image& frame1, const Image& frame2);

struct AttentionMap {
  Image overlay;                // ramp colours blended at 50% over `output`
  Image output;                 // interpolated frame
  int channel = 0;              // selected channel of psi
  bool degenerate = false;      // selected channel flat to 1e-5 relative; drawn at mid-ramp
  std::vector<double> scores;   // spatial mean per channel
};

/// Overlay for the psi channel with the largest spatial mean. psi is
/// [1,C,h,w] with 2h >= output height and 2w >= output width; the upsampled
/// map is cropped to the output's top-left.
template <typename Scalar>
AttentionMap attention_overlay(const Tensor<Scalar>& psi, const Image& output);

/// Runs the pipeline once and renders the attention overlay on its output.
template <typename Scalar>
AttentionMap render_attention(const Model<Scalar>& model, const Image& frame1, const Image& frame2);

/// Side-by-side strip; all images must share a height.
Image montage(const std::vector<const Image*>& images, int gap = 4);

}  // namespace prnet
