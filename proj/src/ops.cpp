#include "prnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "prnet/error.hpp"

namespace prnet {
namespace {

using Index = std::int64_t;

// Upper bound on im2col buffer elements; conv work is split into row bands
// that fit.
constexpr Index kColumnBudget = Index{1} << 22;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw Error(ErrorKind::shape, op, "operand shapes differ: " + a.str() + " vs " + b.str());
}

template <typename Scalar>
void im2col_band(const Scalar* image, Index channels, Index height, Index width, Index y0, Index y1, PadMode mode,
                 Scalar* col) {
  const Index band = (y1 - y0) * width;
  const Scalar pad_value = Scalar(0);
  for (Index ci = 0; ci < channels; ++ci) {
    const Scalar* src = image + ci * height * width;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        Scalar* row = col + ((ci * 3 + ky) * 3 + kx) * band;
        for (Index y = y0; y < y1; ++y) {
          Scalar* dst = row + (y - y0) * width;
          Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) {
            if (mode == PadMode::zeros) {
              std::fill(dst, dst + width, pad_value);
              continue;
            }
            sy = std::clamp<Index>(sy, 0, height - 1);
          }
          const Scalar* srow = src + sy * width;
          if (kx == 1) {
            std::memcpy(dst, srow, sizeof(Scalar) * width);
          } else if (kx == 0) {
            dst[0] = mode == PadMode::zeros ? pad_value : srow[0];
            std::memcpy(dst + 1, srow, sizeof(Scalar) * (width - 1));
          } else {
            std::memcpy(dst, srow + 1, sizeof(Scalar) * (width - 1));
            dst[width - 1] = mode == PadMode::zeros ? pad_value : srow[width - 1];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_band(const Scalar* col, Index channels, Index height, Index width, Index y0, Index y1, PadMode mode,
                 Scalar* image_grad) {
  const Index band = (y1 - y0) * width;
  for (Index ci = 0; ci < channels; ++ci) {
    Scalar* dst_plane = image_grad + ci * height * width;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        const Scalar* row = col + ((ci * 3 + ky) * 3 + kx) * band;
        for (Index y = y0; y < y1; ++y) {
          const Scalar* g = row + (y - y0) * width;
          Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) {
            if (mode == PadMode::zeros) continue;
            sy = std::clamp<Index>(sy, 0, height - 1);
          }
          Scalar* drow = dst_plane + sy * width;
          if (kx == 1) {
            for (Index x = 0; x < width; ++x) drow[x] += g[x];
          } else if (kx == 0) {
            if (mode == PadMode::replicate) drow[0] += g[0];
            for (Index x = 1; x < width; ++x) drow[x - 1] += g[x];
          } else {
            for (Index x = 0; x + 1 < width; ++x) drow[x + 1] += g[x];
            if (mode == PadMode::replicate) drow[width - 1] += g[width - 1];
          }
        }
      }
    }
  }
}

Index rows_per_band(Index k, Index width, Index height) {
  return std::clamp<Index>(kColumnBudget / std::max<Index>(1, k * width), 1, height);
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias, int padding,
                   PadMode mode) {
  const Shape xs = input.shape();
  const Shape ws = weight.shape();
  if (padding != 1) throw Error(ErrorKind::usage, "conv2d", "only padding = 1 is supported");
  if (ws.h != 3 || ws.w != 3) throw Error(ErrorKind::shape, "conv2d", "kernel must be 3x3, weight is " + ws.str());
  if (ws.c != xs.c) {
    throw Error(ErrorKind::shape, "conv2d",
                "input channels disagree: input " + xs.str() + " vs weight " + ws.str());
  }
  if (bias.value().numel() != ws.n) {
    throw Error(ErrorKind::shape, "conv2d",
                "bias " + bias.shape().str() + " does not match " + std::to_string(ws.n) + " output channels");
  }
  const Index cout = ws.n;
  const Index k = ws.c * 9;
  const Index band_rows = rows_per_band(k, xs.w, xs.h);

  using ConstMap = Eigen::Map<const RowMatrix<Scalar>>;
  using Vec = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  const ConstMap w_mat(weight.value().data(), cout, k);
  const Vec b_vec(bias.value().data(), cout);

  Tensor<Scalar> out(Shape{xs.n, cout, xs.h, xs.w});
  Tensor<Scalar> col(Shape{1, 1, k, band_rows * xs.w});
  for (Index n = 0; n < xs.n; ++n) {
    const Scalar* image = input.value().data() + n * xs.c * xs.plane();
    auto out_mat = out.matrix(n);
    for (Index y0 = 0; y0 < xs.h; y0 += band_rows) {
      const Index y1 = std::min(xs.h, y0 + band_rows);
      const Index cols = (y1 - y0) * xs.w;
      im2col_band(image, xs.c, xs.h, xs.w, y0, y1, mode, col.data());
      const ConstMap col_mat(col.data(), k, cols);
      auto block = out_mat.middleCols(y0 * xs.w, cols);
      block.noalias() = w_mat * col_mat;
      block.colwise() += b_vec;
    }
  }

  return make_result<Scalar>(std::move(out), {input, weight, bias}, "conv2d", [mode, band_rows](Node<Scalar>& node) {
    Node<Scalar>& x = node.input(0);
    Node<Scalar>& w = node.input(1);
    Node<Scalar>& b = node.input(2);
    const Shape xs = x.value.shape();
    const Index cout = w.value.shape().n;
    const Index k = xs.c * 9;
    const ConstMap w_mat(w.value.data(), cout, k);
    Tensor<Scalar> col(Shape{1, 1, k, band_rows * xs.w});
    Tensor<Scalar> dcol;
    if (x.requires_grad) dcol = Tensor<Scalar>(col.shape());
    for (Index n = 0; n < xs.n; ++n) {
      const Scalar* image = x.value.data() + n * xs.c * xs.plane();
      const auto gout = std::as_const(node.grad).matrix(n);
      for (Index y0 = 0; y0 < xs.h; y0 += band_rows) {
        const Index y1 = std::min(xs.h, y0 + band_rows);
        const Index cols = (y1 - y0) * xs.w;
        const auto gblock = gout.middleCols(y0 * xs.w, cols);
        if (w.requires_grad) {
          im2col_band(image, xs.c, xs.h, xs.w, y0, y1, mode, col.data());
          const ConstMap col_mat(col.data(), k, cols);
          Eigen::Map<RowMatrix<Scalar>> gw(w.grad_buffer().data(), cout, k);
          gw.noalias() += gblock * col_mat.transpose();
        }
        if (b.requires_grad) {
          Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> gb(b.grad_buffer().data(), cout);
          gb += gblock.rowwise().sum();
        }
        if (x.requires_grad) {
          Eigen::Map<RowMatrix<Scalar>> dcol_mat(dcol.data(), k, cols);
          dcol_mat.noalias() = w_mat.transpose() * gblock;
          col2im_band(dcol.data(), xs.c, xs.h, xs.w, y0, y1, mode, x.grad_buffer().data() + n * xs.c * xs.plane());
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> avg_pool2(const Var<Scalar>& input) {
  const Shape s = input.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw Error(ErrorKind::shape, "avg_pool2", "height and width must be even, got " + s.str());
  }
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor<Scalar> out(os);
  const Scalar* in = input.value().data();
  Scalar* o = out.data();
  for (Index p = 0; p < s.n * s.c; ++p) {
    const Scalar* ip = in + p * s.plane();
    Scalar* op = o + p * os.plane();
    for (Index y = 0; y < os.h; ++y) {
      const Scalar* r0 = ip + 2 * y * s.w;
      const Scalar* r1 = r0 + s.w;
      for (Index x = 0; x < os.w; ++x) {
        op[y * os.w + x] = Scalar(0.25) * ((r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]));
      }
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "avg_pool2", [](Node<Scalar>& node) {
    Node<Scalar>& x = node.input(0);
    const Shape s = x.value.shape();
    const Shape os = node.value.shape();
    Scalar* gi = x.grad_buffer().data();
    const Scalar* go = node.grad.data();
    for (Index p = 0; p < s.n * s.c; ++p) {
      for (Index y = 0; y < os.h; ++y) {
        for (Index xo = 0; xo < os.w; ++xo) {
          const Scalar g = Scalar(0.25) * go[p * os.plane() + y * os.w + xo];
          Scalar* r0 = gi + p * s.plane() + 2 * y * s.w + 2 * xo;
          r0[0] += g;
          r0[1] += g;
          r0[s.w] += g;
          r0[s.w + 1] += g;
        }
      }
    }
  });
}

namespace {

template <typename Scalar>
struct LerpTap {
  Index lo;
  Index hi;
  Scalar t;
};

template <typename Scalar>
std::vector<LerpTap<Scalar>> upsample_taps(Index in_len) {
  std::vector<LerpTap<Scalar>> taps(static_cast<std::size_t>(2 * in_len));
  for (Index o = 0; o < 2 * in_len; ++o) {
    Scalar src = (Scalar(o) + Scalar(0.5)) / Scalar(2) - Scalar(0.5);
    if (src < Scalar(0)) src = Scalar(0);
    const Index lo = std::min<Index>(static_cast<Index>(src), in_len - 1);
    taps[static_cast<std::size_t>(o)] = {lo, std::min<Index>(lo + 1, in_len - 1), src - Scalar(lo)};
  }
  return taps;
}

}  // namespace

template <typename Scalar>
Var<Scalar> upsample_bilinear2(const Var<Scalar>& input) {
  const Shape s = input.shape();
  if (s.h < 1 || s.w < 1) throw Error(ErrorKind::shape, "upsample_bilinear2", "empty spatial extent " + s.str());
  const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
  const auto ty = upsample_taps<Scalar>(s.h);
  const auto tx = upsample_taps<Scalar>(s.w);
  Tensor<Scalar> out(os);
  for (Index p = 0; p < s.n * s.c; ++p) {
    const Scalar* ip = input.value().data() + p * s.plane();
    Scalar* op = out.data() + p * os.plane();
    for (Index y = 0; y < os.h; ++y) {
      const auto& vy = ty[static_cast<std::size_t>(y)];
      const Scalar* r0 = ip + vy.lo * s.w;
      const Scalar* r1 = ip + vy.hi * s.w;
      for (Index x = 0; x < os.w; ++x) {
        const auto& vx = tx[static_cast<std::size_t>(x)];
        const Scalar top = (Scalar(1) - vx.t) * r0[vx.lo] + vx.t * r0[vx.hi];
        const Scalar bottom = (Scalar(1) - vx.t) * r1[vx.lo] + vx.t * r1[vx.hi];
        op[y * os.w + x] = (Scalar(1) - vy.t) * top + vy.t * bottom;
      }
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "upsample_bilinear2", [ty, tx](Node<Scalar>& node) {
    Node<Scalar>& xin = node.input(0);
    const Shape s = xin.value.shape();
    const Shape os = node.value.shape();
    for (Index p = 0; p < s.n * s.c; ++p) {
      Scalar* gp = xin.grad_buffer().data() + p * s.plane();
      const Scalar* go = node.grad.data() + p * os.plane();
      for (Index y = 0; y < os.h; ++y) {
        const auto& vy = ty[static_cast<std::size_t>(y)];
        Scalar* r0 = gp + vy.lo * s.w;
        Scalar* r1 = gp + vy.hi * s.w;
        for (Index x = 0; x < os.w; ++x) {
          const auto& vx = tx[static_cast<std::size_t>(x)];
          const Scalar g = go[y * os.w + x];
          const Scalar g0 = (Scalar(1) - vy.t) * g;
          const Scalar g1 = vy.t * g;
          r0[vx.lo] += (Scalar(1) - vx.t) * g0;
          r0[vx.hi] += vx.t * g0;
          r1[vx.lo] += (Scalar(1) - vx.t) * g1;
          r1[vx.hi] += vx.t * g1;
        }
      }
    }
  });
}

namespace {

// Source (row, col) in the input plane for output (i, j) after `q` quarter turns.
struct RotationMap {
  int q;
  Index h;
  Index w;
  std::pair<Index, Index> source(Index i, Index j) const {
    switch (q) {
      case 1: return {j, w - 1 - i};
      case 2: return {h - 1 - i, w - 1 - j};
      case 3: return {h - 1 - j, i};
      default: return {i, j};
    }
  }
};

}  // namespace

template <typename Scalar>
Var<Scalar> rot90(const Var<Scalar>& input, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  const Shape s = input.shape();
  const Shape os = (q % 2 == 0) ? s : Shape{s.n, s.c, s.w, s.h};
  const RotationMap map{q, s.h, s.w};
  Tensor<Scalar> out(os);
  for (Index p = 0; p < s.n * s.c; ++p) {
    const Scalar* ip = input.value().data() + p * s.plane();
    Scalar* op = out.data() + p * os.plane();
    for (Index i = 0; i < os.h; ++i) {
      for (Index j = 0; j < os.w; ++j) {
        const auto [si, sj] = map.source(i, j);
        op[i * os.w + j] = ip[si * s.w + sj];
      }
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "rot90", [map](Node<Scalar>& node) {
    Node<Scalar>& x = node.input(0);
    const Shape s = x.value.shape();
    const Shape os = node.value.shape();
    for (Index p = 0; p < s.n * s.c; ++p) {
      Scalar* gp = x.grad_buffer().data() + p * s.plane();
      const Scalar* go = node.grad.data() + p * os.plane();
      for (Index i = 0; i < os.h; ++i) {
        for (Index j = 0; j < os.w; ++j) {
          const auto [si, sj] = map.source(i, j);
          gp[si * s.w + sj] += go[i * os.w + j];
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> channel_softmax(const Var<Scalar>& input) {
  const Shape s = input.shape();
  Tensor<Scalar> out(s);
  const Index hw = s.plane();
  for (Index n = 0; n < s.n; ++n) {
    const Scalar* ip = input.value().data() + n * s.c * hw;
    Scalar* op = out.data() + n * s.c * hw;
    for (Index p = 0; p < hw; ++p) {
      Scalar peak = ip[p];
      for (Index c = 1; c < s.c; ++c) peak = std::max(peak, ip[c * hw + p]);
      Scalar total = 0;
      for (Index c = 0; c < s.c; ++c) {
        const Scalar e = std::exp(ip[c * hw + p] - peak);
        op[c * hw + p] = e;
        total += e;
      }
      const Scalar inv = Scalar(1) / total;
      for (Index c = 0; c < s.c; ++c) op[c * hw + p] *= inv;
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "channel_softmax", [](Node<Scalar>& node) {
    Node<Scalar>& x = node.input(0);
    const Shape s = node.value.shape();
    const Index hw = s.plane();
    for (Index n = 0; n < s.n; ++n) {
      const Scalar* y = node.value.data() + n * s.c * hw;
      const Scalar* g = node.grad.data() + n * s.c * hw;
      Scalar* gx = x.grad_buffer().data() + n * s.c * hw;
      for (Index p = 0; p < hw; ++p) {
        Scalar dot = 0;
        for (Index c = 0; c < s.c; ++c) dot += g[c * hw + p] * y[c * hw + p];
        for (Index c = 0; c < s.c; ++c) gx[c * hw + p] += y[c * hw + p] * (g[c * hw + p] - dot);
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& input) {
  Tensor<Scalar> out(input.shape());
  out.array() = input.value().array().max(Scalar(0));
  return make_result<Scalar>(std::move(out), {input}, "relu", [](Node<Scalar>& node) {
    auto gx = node.input(0).grad_buffer().array();
    gx += (node.value.array() > Scalar(0)).select(node.grad.array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& input) {
  Tensor<Scalar> out(input.shape());
  const Scalar* x = input.value().data();
  Scalar* y = out.data();
  for (Index i = 0; i < out.numel(); ++i) {
    if (x[i] >= Scalar(0)) {
      y[i] = Scalar(1) / (Scalar(1) + std::exp(-x[i]));
    } else {
      const Scalar e = std::exp(x[i]);
      y[i] = e / (Scalar(1) + e);
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "sigmoid", [](Node<Scalar>& node) {
    const auto y = node.value.array();
    node.input(0).grad_buffer().array() += node.grad.array() * y * (Scalar(1) - y);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<Scalar> out(a.shape());
  out.array() = a.value().array() + b.value().array();
  return make_result<Scalar>(std::move(out), {a, b}, "add", [](Node<Scalar>& node) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (node.input(i).requires_grad) node.input(i).grad_buffer().array() += node.grad.array();
    }
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<Scalar> out(a.shape());
  out.array() = a.value().array() * b.value().array();
  return make_result<Scalar>(std::move(out), {a, b}, "mul", [](Node<Scalar>& node) {
    Node<Scalar>& x = node.input(0);
    Node<Scalar>& y = node.input(1);
    if (x.requires_grad) x.grad_buffer().array() += node.grad.array() * y.value.array();
    if (y.requires_grad) y.grad_buffer().array() += node.grad.array() * x.value.array();
  });
}

template <typename Scalar>
Var<Scalar> replication_pad(const Var<Scalar>& input, int left, int right, int top, int bottom) {
  const Shape s = input.shape();
  if (left < 0 || right < 0 || top < 0 || bottom < 0) {
    throw Error(ErrorKind::usage, "replication_pad", "pad amounts must be non-negative");
  }
  if (s.h < 1 || s.w < 1) throw Error(ErrorKind::shape, "replication_pad", "empty spatial extent " + s.str());
  const Shape os{s.n, s.c, s.h + top + bottom, s.w + left + right};
  Tensor<Scalar> out(os);
  for (Index p = 0; p < s.n * s.c; ++p) {
    const Scalar* ip = input.value().data() + p * s.plane();
    Scalar* op = out.data() + p * os.plane();
    for (Index y = 0; y < os.h; ++y) {
      const Index sy = std::clamp<Index>(y - top, 0, s.h - 1);
      for (Index x = 0; x < os.w; ++x) {
        op[y * os.w + x] = ip[sy * s.w + std::clamp<Index>(x - left, 0, s.w - 1)];
      }
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "replication_pad", [left, top](Node<Scalar>& node) {
    Node<Scalar>& xin = node.input(0);
    const Shape s = xin.value.shape();
    const Shape os = node.value.shape();
    for (Index p = 0; p < s.n * s.c; ++p) {
      Scalar* gp = xin.grad_buffer().data() + p * s.plane();
      const Scalar* go = node.grad.data() + p * os.plane();
      for (Index y = 0; y < os.h; ++y) {
        const Index sy = std::clamp<Index>(y - top, 0, s.h - 1);
        for (Index x = 0; x < os.w; ++x) {
          gp[sy * s.w + std::clamp<Index>(x - left, 0, s.w - 1)] += go[y * os.w + x];
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> crop(const Var<Scalar>& input, Index top, Index left, Index height, Index width) {
  const Shape s = input.shape();
  if (top < 0 || left < 0 || height < 0 || width < 0 || top + height > s.h || left + width > s.w) {
    throw Error(ErrorKind::shape, "crop", "window exceeds input " + s.str());
  }
  const Shape os{s.n, s.c, height, width};
  Tensor<Scalar> out(os);
  for (Index p = 0; p < s.n * s.c; ++p) {
    for (Index y = 0; y < height; ++y) {
      const Scalar* src = input.value().data() + p * s.plane() + (y + top) * s.w + left;
      std::copy(src, src + width, out.data() + p * os.plane() + y * width);
    }
  }
  return make_result<Scalar>(std::move(out), {input}, "crop", [top, left](Node<Scalar>& node) {
    Node<Scalar>& x = node.input(0);
    const Shape s = x.value.shape();
    const Shape os = node.value.shape();
    for (Index p = 0; p < s.n * s.c; ++p) {
      for (Index y = 0; y < os.h; ++y) {
        Scalar* dst = x.grad_buffer().data() + p * s.plane() + (y + top) * s.w + left;
        const Scalar* g = node.grad.data() + p * os.plane() + y * os.w;
        for (Index xx = 0; xx < os.w; ++xx) dst[xx] += g[xx];
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> l1_loss(const Var<Scalar>& prediction, const Var<Scalar>& target) {
  require_same_shape(prediction.shape(), target.shape(), "l1_loss");
  if (prediction.value().numel() == 0) throw Error(ErrorKind::shape, "l1_loss", "empty operands");
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out[0] = (prediction.value().array() - target.value().array()).abs().sum() / Scalar(prediction.value().numel());
  return make_result<Scalar>(std::move(out), {prediction, target}, "l1_loss", [](Node<Scalar>& node) {
    Node<Scalar>& p = node.input(0);
    Node<Scalar>& t = node.input(1);
    const Scalar scale = node.grad[0] / Scalar(p.value.numel());
    const auto diff = p.value.array() - t.value.array();
    const auto sign = (diff > Scalar(0)).template cast<Scalar>() - (diff < Scalar(0)).template cast<Scalar>();
    if (p.requires_grad) p.grad_buffer().array() += scale * sign;
    if (t.requires_grad) t.grad_buffer().array() -= scale * sign;
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& inputs) {
  if (inputs.empty()) throw Error(ErrorKind::usage, "concat_channels", "no inputs");
  const Shape first = inputs.front().shape();
  Index channels = 0;
  for (const auto& v : inputs) {
    const Shape s = v.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw Error(ErrorKind::shape, "concat_channels", "operand shapes differ: " + first.str() + " vs " + s.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  Tensor<Scalar> out(os);
  for (Index n = 0; n < os.n; ++n) {
    Scalar* dst = out.data() + n * os.c * os.plane();
    for (const auto& v : inputs) {
      const Index len = v.shape().c * os.plane();
      const Scalar* src = v.value().data() + n * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  return make_result<Scalar>(std::move(out), inputs, "concat_channels", [](Node<Scalar>& node) {
    const Shape os = node.value.shape();
    for (Index n = 0; n < os.n; ++n) {
      const Scalar* g = node.grad.data() + n * os.c * os.plane();
      for (auto& in : node.inputs) {
        const Index len = in->value.shape().c * os.plane();
        if (in->requires_grad) {
          Scalar* dst = in->grad_buffer().data() + n * len;
          for (Index i = 0; i < len; ++i) dst[i] += g[i];
        }
        g += len;
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& input) {
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out[0] = input.value().array().sum();
  return make_result<Scalar>(std::move(out), {input}, "sum", [](Node<Scalar>& node) {
    node.input(0).grad_buffer().array() += node.grad[0];
  });
}

#define PRNET_INSTANTIATE_OPS(S)                                                                         \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&, int, PadMode);                    \
  template Var<S> avg_pool2(const Var<S>&);                                                              \
  template Var<S> upsample_bilinear2(const Var<S>&);                                                     \
  template Var<S> rot90(const Var<S>&, int);                                                             \
  template Var<S> channel_softmax(const Var<S>&);                                                        \
  template Var<S> relu(const Var<S>&);                                                                   \
  template Var<S> sigmoid(const Var<S>&);                                                                \
  template Var<S> add(const Var<S>&, const Var<S>&);                                                     \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                                     \
  template Var<S> replication_pad(const Var<S>&, int, int, int, int);                                    \
  template Var<S> crop(const Var<S>&, Index, Index, Index, Index);                                       \
  template Var<S> l1_loss(const Var<S>&, const Var<S>&);                                                 \
  template Var<S> concat_channels(const std::vector<Var<S>>&);                                           \
  template Var<S> sum(const Var<S>&);

PRNET_INSTANTIATE_OPS(float)
PRNET_INSTANTIATE_OPS(double)

#undef PRNET_INSTANTIATE_OPS

}  // namespace prnet
