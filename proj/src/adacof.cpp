#include "prnet/adacof.hpp"

#include <algorithm>
#include <cmath>

#include "prnet/error.hpp"

namespace prnet {

void WarpGeometry::validate(const char* op) const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw Error(ErrorKind::config, op, "kernel size must be odd and positive, got " + std::to_string(kernel_size));
  }
  if (dilation < 1) throw Error(ErrorKind::config, op, "dilation must be >= 1, got " + std::to_string(dilation));
}

void check_warp_shapes(const Shape& image, const Shape& weights, const Shape& alpha, const Shape& beta,
                       const WarpGeometry& geometry, const char* op) {
  geometry.validate(op);
  const std::int64_t taps = geometry.taps();
  for (const Shape* s : {&weights, &alpha, &beta}) {
    if (s->c != taps) {
      throw Error(ErrorKind::shape, op,
                  "expected " + std::to_string(taps) + " tap channels, got " + s->str());
    }
  }
  if (alpha != weights || beta != weights) {
    throw Error(ErrorKind::shape, op,
                "weights/alpha/beta disagree: " + weights.str() + ", " + alpha.str() + ", " + beta.str());
  }
  const std::int64_t p = geometry.padding();
  if (image.n != weights.n || image.h != weights.h + 2 * p || image.w != weights.w + 2 * p) {
    throw Error(ErrorKind::shape, op,
                "padded image " + image.str() + " inconsistent with kernel field " + weights.str() +
                    " and padding " + std::to_string(p));
  }
}

namespace {

using Index = std::int64_t;

// Bilinear sample point on a clamped coordinate grid.
template <typename Scalar>
struct SamplePoint {
  Index y0, y1, x0, x1;
  Scalar ty, tx;
  bool y_inside, x_inside;  // false where clamping removed the offset dependence

  SamplePoint(Scalar y, Scalar x, Index height, Index width) {
    const Scalar ymax = Scalar(height - 1);
    const Scalar xmax = Scalar(width - 1);
    y_inside = y >= Scalar(0) && y < ymax;
    x_inside = x >= Scalar(0) && x < xmax;
    y = std::clamp(y, Scalar(0), ymax);
    x = std::clamp(x, Scalar(0), xmax);
    const Scalar fy = std::floor(y);
    const Scalar fx = std::floor(x);
    y0 = static_cast<Index>(fy);
    x0 = static_cast<Index>(fx);
    y1 = std::min(y0 + 1, height - 1);
    x1 = std::min(x0 + 1, width - 1);
    ty = y - fy;
    tx = x - fx;
  }
};

}  // namespace

template <typename Scalar>
Var<Scalar> adacof_warp(const Var<Scalar>& padded_image, const WarpParams<Scalar>& params) {
  const WarpGeometry g = params.geometry;
  check_warp_shapes(padded_image.shape(), params.weights.shape(), params.alpha.shape(),
                            params.beta.shape(), g, "adacof_warp");
  const Shape is = padded_image.shape();
  const Shape fs = params.weights.shape();
  const Shape os{fs.n, is.c, fs.h, fs.w};
  const Index taps = g.taps();
  const Index hw = fs.plane();
  const Index ihw = is.plane();

  Tensor<Scalar> out(os);
  for (Index n = 0; n < fs.n; ++n) {
    const Scalar* img = padded_image.value().data() + n * is.c * ihw;
    const Scalar* wt = params.weights.value().data() + n * taps * hw;
    const Scalar* al = params.alpha.value().data() + n * taps * hw;
    const Scalar* be = params.beta.value().data() + n * taps * hw;
    Scalar* dst = out.data() + n * os.c * hw;
    for (Index i = 0; i < fs.h; ++i) {
      for (Index j = 0; j < fs.w; ++j) {
        const Index p = i * fs.w + j;
        for (Index t = 0; t < taps; ++t) {
          const Index k = t / g.kernel_size;
          const Index l = t % g.kernel_size;
          const SamplePoint<Scalar> s(Scalar(i + g.dilation * k) + al[t * hw + p],
                                      Scalar(j + g.dilation * l) + be[t * hw + p], is.h, is.w);
          const Scalar w = wt[t * hw + p];
          for (Index c = 0; c < is.c; ++c) {
            const Scalar* plane = img + c * ihw;
            const Scalar top = (Scalar(1) - s.tx) * plane[s.y0 * is.w + s.x0] + s.tx * plane[s.y0 * is.w + s.x1];
            const Scalar bot = (Scalar(1) - s.tx) * plane[s.y1 * is.w + s.x0] + s.tx * plane[s.y1 * is.w + s.x1];
            dst[c * hw + p] += w * ((Scalar(1) - s.ty) * top + s.ty * bot);
          }
        }
      }
    }
  }

  return make_result<Scalar>(
      std::move(out), {padded_image, params.weights, params.alpha, params.beta}, "adacof_warp",
      [g](Node<Scalar>& node) {
        Node<Scalar>& image = node.input(0);
        Node<Scalar>& weights = node.input(1);
        Node<Scalar>& alpha = node.input(2);
        Node<Scalar>& beta = node.input(3);
        const Shape is = image.value.shape();
        const Shape fs = weights.value.shape();
        const Index taps = g.taps();
        const Index hw = fs.plane();
        const Index ihw = is.plane();
        Scalar* g_img = image.requires_grad ? image.grad_buffer().data() : nullptr;
        Scalar* g_w = weights.requires_grad ? weights.grad_buffer().data() : nullptr;
        Scalar* g_al = alpha.requires_grad ? alpha.grad_buffer().data() : nullptr;
        Scalar* g_be = beta.requires_grad ? beta.grad_buffer().data() : nullptr;
        for (Index n = 0; n < fs.n; ++n) {
          const Scalar* img = image.value.data() + n * is.c * ihw;
          const Scalar* wt = weights.value.data() + n * taps * hw;
          const Scalar* al = alpha.value.data() + n * taps * hw;
          const Scalar* be = beta.value.data() + n * taps * hw;
          const Scalar* go = node.grad.data() + n * is.c * hw;
          const Index fo = n * taps * hw;
          for (Index i = 0; i < fs.h; ++i) {
            for (Index j = 0; j < fs.w; ++j) {
              const Index p = i * fs.w + j;
              for (Index t = 0; t < taps; ++t) {
                const Index k = t / g.kernel_size;
                const Index l = t % g.kernel_size;
                const SamplePoint<Scalar> s(Scalar(i + g.dilation * k) + al[t * hw + p],
                                            Scalar(j + g.dilation * l) + be[t * hw + p], is.h, is.w);
                const Scalar w = wt[t * hw + p];
                Scalar d_w = 0;
                Scalar d_y = 0;
                Scalar d_x = 0;
                for (Index c = 0; c < is.c; ++c) {
                  const Scalar gc = go[c * hw + p];
                  const Scalar* plane = img + c * ihw;
                  const Scalar v00 = plane[s.y0 * is.w + s.x0];
                  const Scalar v01 = plane[s.y0 * is.w + s.x1];
                  const Scalar v10 = plane[s.y1 * is.w + s.x0];
                  const Scalar v11 = plane[s.y1 * is.w + s.x1];
                  const Scalar top = (Scalar(1) - s.tx) * v00 + s.tx * v01;
                  const Scalar bot = (Scalar(1) - s.tx) * v10 + s.tx * v11;
                  d_w += gc * ((Scalar(1) - s.ty) * top + s.ty * bot);
                  d_y += gc * (bot - top);
                  d_x += gc * ((Scalar(1) - s.ty) * (v01 - v00) + s.ty * (v11 - v10));
                  if (g_img) {
                    Scalar* gp = g_img + (n * is.c + c) * ihw;
                    const Scalar gw = gc * w;
                    gp[s.y0 * is.w + s.x0] += gw * (Scalar(1) - s.ty) * (Scalar(1) - s.tx);
                    gp[s.y0 * is.w + s.x1] += gw * (Scalar(1) - s.ty) * s.tx;
                    gp[s.y1 * is.w + s.x0] += gw * s.ty * (Scalar(1) - s.tx);
                    gp[s.y1 * is.w + s.x1] += gw * s.ty * s.tx;
                  }
                }
                if (g_w) g_w[fo + t * hw + p] += d_w;
                if (g_al && s.y_inside) g_al[fo + t * hw + p] += w * d_y;
                if (g_be && s.x_inside) g_be[fo + t * hw + p] += w * d_x;
              }
            }
          }
        }
      });
}

template Var<float> adacof_warp(const Var<float>&, const WarpParams<float>&);
template Var<double> adacof_warp(const Var<double>&, const WarpParams<double>&);

}  // namespace prnet
