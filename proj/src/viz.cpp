#include "prnet/viz.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "prnet/error.hpp"
#include "prnet/ops.hpp"
#include "prnet/pipeline.hpp"

namespace prnet {

ColorRamp::ColorRamp(std::vector<std::pair<double, Rgb>> stops) : stops_(std::move(stops)) {
  if (stops_.size() < 2 || stops_.front().first != 0.0 || stops_.back().first != 1.0 ||
      !std::is_sorted(stops_.begin(), stops_.end(), [](const auto& a, const auto& b) { return a.first < b.first; })) {
    throw Error(ErrorKind::config, "ColorRamp", "stops must be sorted and span [0,1]");
  }
}

Rgb ColorRamp::operator()(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  std::size_t k = 1;
  while (k + 1 < stops_.size() && t > stops_[k].first) ++k;
  const auto& [t0, c0] = stops_[k - 1];
  const auto& [t1, c1] = stops_[k];
  const double f = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
  Rgb out{};
  for (int c = 0; c < 3; ++c) out[c] = static_cast<std::uint8_t>(std::lround(c0[c] + f * (c1[c] - c0[c])));
  return out;
}

ColorRamp ColorRamp::occlusion() {
  return ColorRamp({{0.0, Rgb{0, 0, 255}}, {0.5, Rgb{0, 255, 0}}, {1.0, Rgb{255, 0, 0}}});
}

ColorRamp ColorRamp::attention() { return ColorRamp({{0.0, Rgb{0, 0, 255}}, {1.0, Rgb{255, 0, 0}}}); }

std::string occlusion_legend() {
  return "occlusion colours: green = both frames contribute (V = 0.5); "
         "red = taken from frame 1, occluded in frame 2 (V -> 1); "
         "blue = taken from frame 2, occluded in frame 1 (V -> 0)";
}

template <typename Scalar>
Image render_occlusion(const Tensor<Scalar>& occlusion) {
  const Shape s = occlusion.shape();
  if (s.n != 1 || s.c != 1) throw Error(ErrorKind::shape, "render_occlusion", "expected [1,1,H,W], got " + s.str());
  const ColorRamp ramp = ColorRamp::occlusion();
  Image out(static_cast<int>(s.w), static_cast<int>(s.h));
  std::int64_t clamped = 0;
  for (std::int64_t y = 0; y < s.h; ++y) {
    for (std::int64_t x = 0; x < s.w; ++x) {
      const double v = static_cast<double>(occlusion(0, 0, y, x));
      if (!(v >= 0.0 && v <= 1.0)) ++clamped;
      const Rgb c = ramp(std::isnan(v) ? 0.5 : v);
      for (int k = 0; k < 3; ++k) out.at(static_cast<int>(x), static_cast<int>(y), k) = c[k];
    }
  }
  if (clamped > 0) std::cerr << "warning: render_occlusion clamped " << clamped << " values outside [0,1]\n";
  return out;
}

template <typename Scalar>
Tensor<Scalar> occlusion_map(const Model<Scalar>& model, const Image& frame1, const Image& frame2) {
  NoGradGuard guard;
  const auto syn = synthesize(model, Var<Scalar>(to_tensor<Scalar>(frame1)), Var<Scalar>(to_tensor<Scalar>(frame2)));
  return crop(syn.field.occlusion, 0, 0, frame1.height, frame1.width).value();
}

template <typename Scalar>
AttentionMap attention_overlay(const Tensor<Scalar>& psi, const Image& output) {
  const Shape s = psi.shape();
  if (s.n != 1 || s.c < 1 || 2 * s.h < output.height || 2 * s.w < output.width) {
    throw Error(ErrorKind::shape, "attention_overlay",
                "psi " + s.str() + " does not cover a " + std::to_string(output.width) + "x" +
                    std::to_string(output.height) + " output");
  }
  AttentionMap result;
  result.output = output;
  const std::int64_t plane = s.plane();
  for (std::int64_t c = 0; c < s.c; ++c) {
    result.scores.push_back(static_cast<double>(psi.array().segment(c * plane, plane).template cast<double>().mean()));
  }
  result.channel = static_cast<int>(std::max_element(result.scores.begin(), result.scores.end()) - result.scores.begin());

  Tensor<double> selected(Shape{1, 1, s.h, s.w});
  selected.array() = psi.array().segment(result.channel * plane, plane).template cast<double>();
  const double lo = selected.array().minCoeff();
  const double hi = selected.array().maxCoeff();
  // Rounding leaves constant inputs with a tiny spread; treat it as flat.
  result.degenerate = !(hi - lo > 1e-5 * std::max({1.0, std::abs(lo), std::abs(hi)}));
  if (result.degenerate) {
    selected.array() = 0.5;
  } else {
    selected.array() = (selected.array() - lo) / (hi - lo);
  }
  NoGradGuard guard;
  const Tensor<double> up = upsample_bilinear2(Var<double>(selected)).value();

  const ColorRamp ramp = ColorRamp::attention();
  result.overlay = output;
  for (int y = 0; y < output.height; ++y) {
    for (int x = 0; x < output.width; ++x) {
      const Rgb c = ramp(up(0, 0, y, x));
      for (int k = 0; k < 3; ++k) {
        result.overlay.at(x, y, k) = static_cast<std::uint8_t>(std::lround(0.5 * c[k] + 0.5 * output.at(x, y, k)));
      }
    }
  }
  return result;
}

template <typename Scalar>
AttentionMap render_attention(const Model<Scalar>& model, const Image& frame1, const Image& frame2) {
  NoGradGuard guard;
  FeatureTrace<Scalar> trace;
  const auto syn =
      synthesize(model, Var<Scalar>(to_tensor<Scalar>(frame1)), Var<Scalar>(to_tensor<Scalar>(frame2)), &trace);
  return attention_overlay(trace.psi.value(), to_image(syn.frame.value()));
}

Image montage(const std::vector<const Image*>& images, int gap) {
  if (images.empty()) throw Error(ErrorKind::usage, "montage", "no images");
  int width = gap * static_cast<int>(images.size() - 1);
  for (const Image* img : images) {
    if (img->height != images.front()->height) throw Error(ErrorKind::shape, "montage", "image heights differ");
    width += img->width;
  }
  Image out(width, images.front()->height, 255);
  int left = 0;
  for (const Image* img : images) {
    for (int y = 0; y < img->height; ++y) {
      for (int x = 0; x < img->width; ++x) {
        for (int c = 0; c < 3; ++c) out.at(left + x, y, c) = img->at(x, y, c);
      }
    }
    left += img->width + gap;
  }
  return out;
}

template Image render_occlusion(const Tensor<float>&);
template Image render_occlusion(const Tensor<double>&);
template Tensor<float> occlusion_map(const Model<float>&, const Image&, const Image&);
template Tensor<double> occlusion_map(const Model<double>&, const Image&, const Image&);
template AttentionMap attention_overlay(const Tensor<float>&, const Image&);
template AttentionMap attention_overlay(const Tensor<double>&, const Image&);
template AttentionMap render_attention(const Model<float>&, const Image&, const Image&);
template AttentionMap render_attention(const Model<double>&, const Image&, const Image&);

}  // namespace prnet
