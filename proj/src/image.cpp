#include "prnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "prnet/error.hpp"

namespace prnet {

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorKind::io, "read_png", "cannot open " + path.string());
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw Error(ErrorKind::format, "read_png", path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::io, "read_png", "libpng initialisation failed");
  }
  Image image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::format, "read_png", "corrupt PNG data in " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::format, "read_png", "unsupported pixel layout in " + path.string());
  }
  image = Image(width, height);
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = &image.pixels[static_cast<std::size_t>(y) * width * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0) throw Error(ErrorKind::usage, "write_png", "empty image");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorKind::io, "write_png", "cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "write_png", "libpng initialisation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "write_png", "write failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(y) * image.width * 3]);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::uint8_t quantize(double value) {
  const double v = std::clamp(value, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::round(v));
}

template <typename Scalar>
Tensor<Scalar> to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw Error(ErrorKind::usage, "to_tensor", "no images");
  const Image& first = *images.front();
  Tensor<Scalar> t(Shape{static_cast<std::int64_t>(images.size()), 3, first.height, first.width});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& im = *images[n];
    if (!im.same_size(first)) throw Error(ErrorKind::shape, "to_tensor", "images differ in size");
    for (int y = 0; y < im.height; ++y) {
      for (int x = 0; x < im.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          t(static_cast<std::int64_t>(n), c, y, x) = static_cast<Scalar>(im.at(x, y, c)) / Scalar(255);
        }
      }
    }
  }
  return t;
}

template <typename Scalar>
Image to_image(const Tensor<Scalar>& tensor, std::int64_t n) {
  const Shape s = tensor.shape();
  if (s.c != 3 || n < 0 || n >= s.n) throw Error(ErrorKind::shape, "to_image", "expected [N,3,H,W], got " + s.str());
  Image im(static_cast<int>(s.w), static_cast<int>(s.h));
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      for (int c = 0; c < 3; ++c) im.at(x, y, c) = quantize(static_cast<double>(tensor(n, c, y, x)));
    }
  }
  return im;
}

template Tensor<float> to_tensor(const std::vector<const Image*>&);
template Tensor<double> to_tensor(const std::vector<const Image*>&);
template Image to_image(const Tensor<float>&, std::int64_t);
template Image to_image(const Tensor<double>&, std::int64_t);

}  // namespace prnet
