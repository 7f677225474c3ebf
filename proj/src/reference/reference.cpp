#include "prnet/reference.hpp"

#include <algorithm>
#include <cmath>

#include "prnet/adacof.hpp"

namespace prnet::reference {

template <typename Scalar>
Tensor<Scalar> adacof_warp(const Tensor<Scalar>& padded_image, const Tensor<Scalar>& weights,
                           const Tensor<Scalar>& alpha, const Tensor<Scalar>& beta, int kernel_size, int dilation) {
  const WarpGeometry geometry{kernel_size, dilation};
  check_warp_shapes(padded_image.shape(), weights.shape(), alpha.shape(), beta.shape(), geometry,
                    "reference::adacof_warp");
  const Shape is = padded_image.shape();
  const Shape fs = weights.shape();
  Tensor<Scalar> out(Shape{fs.n, is.c, fs.h, fs.w});
  for (std::int64_t n = 0; n < fs.n; ++n) {
    for (std::int64_t c = 0; c < is.c; ++c) {
      for (std::int64_t i = 0; i < fs.h; ++i) {
        for (std::int64_t j = 0; j < fs.w; ++j) {
          double acc = 0;
          for (int k = 0; k < kernel_size; ++k) {
            for (int l = 0; l < kernel_size; ++l) {
              const int tap = k * kernel_size + l;
              double y = static_cast<double>(i) + dilation * k + static_cast<double>(alpha(n, tap, i, j));
              double x = static_cast<double>(j) + dilation * l + static_cast<double>(beta(n, tap, i, j));
              y = std::min(std::max(y, 0.0), static_cast<double>(is.h - 1));
              x = std::min(std::max(x, 0.0), static_cast<double>(is.w - 1));
              double sample = 0;
              for (std::int64_t sy = 0; sy < is.h; ++sy) {
                for (std::int64_t sx = 0; sx < is.w; ++sx) {
                  const double wy = std::max(0.0, 1.0 - std::abs(y - static_cast<double>(sy)));
                  const double wx = std::max(0.0, 1.0 - std::abs(x - static_cast<double>(sx)));
                  sample += wy * wx * static_cast<double>(padded_image(n, c, sy, sx));
                }
              }
              acc += static_cast<double>(weights(n, tap, i, j)) * sample;
            }
          }
          out(n, c, i, j) = static_cast<Scalar>(acc);
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      PadMode mode) {
  const Shape xs = input.shape();
  const Shape ws = weight.shape();
  Tensor<Scalar> out(Shape{xs.n, ws.n, xs.h, xs.w});
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t co = 0; co < ws.n; ++co) {
      for (std::int64_t y = 0; y < xs.h; ++y) {
        for (std::int64_t x = 0; x < xs.w; ++x) {
          double acc = static_cast<double>(bias[co]);
          for (std::int64_t ci = 0; ci < xs.c; ++ci) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                std::int64_t sy = y + ky - 1;
                std::int64_t sx = x + kx - 1;
                const bool outside = sy < 0 || sy >= xs.h || sx < 0 || sx >= xs.w;
                if (outside && mode == PadMode::zeros) continue;
                sy = std::clamp<std::int64_t>(sy, 0, xs.h - 1);
                sx = std::clamp<std::int64_t>(sx, 0, xs.w - 1);
                acc += static_cast<double>(weight(co, ci, ky, kx)) * static_cast<double>(input(n, ci, sy, sx));
              }
            }
          }
          out(n, co, y, x) = static_cast<Scalar>(acc);
        }
      }
    }
  }
  return out;
}

template Tensor<float> adacof_warp(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                   const Tensor<float>&, int, int);
template Tensor<double> adacof_warp(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                    const Tensor<double>&, int, int);
template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, PadMode);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, PadMode);

}  // namespace prnet::reference
