#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

/// 8-bit RGB image, interleaved, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
  friend bool operator==(const Image&, const Image&) = default;
};

Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

/// Stacks images into [N,3,H,W] with values in [0,1].
template <typename Scalar>
Tensor<Scalar> to_tensor(const std::vector<const Image*>& images);

template <typename Scalar>
Tensor<Scalar> to_tensor(const Image& image) {
  return to_tensor<Scalar>(std::vector<const Image*>{&image});
}

/// Converts batch item `n` of a [N,3,H,W] tensor: clamp to [0,1], scale by
/// 255, round half away from zero.
template <typename Scalar>
Image to_image(const Tensor<Scalar>& tensor, std::int64_t n = 0);

/// Quantizes one value in [0,1] to 8 bits.
std::uint8_t quantize(double value);

}  // namespace prnet
