#include "prnet/pipeline.hpp"

#include "prnet/error.hpp"
#include "prnet/ops.hpp"

namespace prnet {

std::int64_t round_up(std::int64_t value, std::int64_t multiple) {
  return (value + multiple - 1) / multiple * multiple;
}

template <typename Scalar>
Var<Scalar> blend(const Var<Scalar>& warped1, const Var<Scalar>& warped2, const Var<Scalar>& occlusion) {
  const Shape s = warped1.shape();
  const Shape vs = occlusion.shape();
  if (warped2.shape() != s || vs.n != s.n || vs.c != 1 || vs.h != s.h || vs.w != s.w) {
    throw Error(ErrorKind::shape, "blend",
                "warped frames " + s.str() + " / " + warped2.shape().str() + " and occlusion " + vs.str() +
                    " disagree");
  }
  const std::int64_t hw = s.plane();
  Tensor<Scalar> out(s);
  for (std::int64_t n = 0; n < s.n; ++n) {
    const Scalar* v = occlusion.value().data() + n * hw;
    for (std::int64_t c = 0; c < s.c; ++c) {
      const std::int64_t off = (n * s.c + c) * hw;
      const Scalar* a = warped1.value().data() + off;
      const Scalar* b = warped2.value().data() + off;
      Scalar* o = out.data() + off;
      for (std::int64_t p = 0; p < hw; ++p) o[p] = v[p] * a[p] + (Scalar(1) - v[p]) * b[p];
    }
  }
  return make_result<Scalar>(std::move(out), {warped1, warped2, occlusion}, "blend", [](Node<Scalar>& node) {
    Node<Scalar>& a = node.input(0);
    Node<Scalar>& b = node.input(1);
    Node<Scalar>& v = node.input(2);
    const Shape s = node.value.shape();
    const std::int64_t hw = s.plane();
    for (std::int64_t n = 0; n < s.n; ++n) {
      const Scalar* vv = v.value.data() + n * hw;
      for (std::int64_t c = 0; c < s.c; ++c) {
        const std::int64_t off = (n * s.c + c) * hw;
        const Scalar* g = node.grad.data() + off;
        if (a.requires_grad) {
          Scalar* ga = a.grad_buffer().data() + off;
          for (std::int64_t p = 0; p < hw; ++p) ga[p] += g[p] * vv[p];
        }
        if (b.requires_grad) {
          Scalar* gb = b.grad_buffer().data() + off;
          for (std::int64_t p = 0; p < hw; ++p) gb[p] += g[p] * (Scalar(1) - vv[p]);
        }
        if (v.requires_grad) {
          Scalar* gv = v.grad_buffer().data() + n * hw;
          const Scalar* av = a.value.data() + off;
          const Scalar* bv = b.value.data() + off;
          for (std::int64_t p = 0; p < hw; ++p) gv[p] += g[p] * (av[p] - bv[p]);
        }
      }
    }
  });
}

template <typename Scalar>
Synthesis<Scalar> synthesize(const Model<Scalar>& model, const Var<Scalar>& frame1, const Var<Scalar>& frame2,
                             FeatureTrace<Scalar>* trace) {
  const Shape s = frame1.shape();
  if (frame2.shape() != s || s.c != 3) {
    throw Error(ErrorKind::shape, "interpolate",
                "frames must be matching [N,3,H,W], got " + s.str() + " and " + frame2.shape().str());
  }
  if (s.h < 8 || s.w < 8) throw Error(ErrorKind::shape, "interpolate", "frames smaller than 8x8: " + s.str());

  const std::int64_t multiple = model.config().size_multiple();
  const auto pad_h = static_cast<int>(round_up(s.h, multiple) - s.h);
  const auto pad_w = static_cast<int>(round_up(s.w, multiple) - s.w);
  auto fit = [&](const Var<Scalar>& f) { return pad_h == 0 && pad_w == 0 ? f : replication_pad(f, 0, pad_w, 0, pad_h); };
  const Var<Scalar> in1 = fit(frame1);
  const Var<Scalar> in2 = fit(frame2);

  Synthesis<Scalar> out;
  out.padded_height = s.h + pad_h;
  out.padded_width = s.w + pad_w;
  out.field = forward_features(model, in1, in2, trace);

  const int p = out.field.geometry.padding();
  const Var<Scalar> warped1 = adacof_warp(replication_pad(in1, p, p, p, p), out.field.frame1());
  const Var<Scalar> warped2 = adacof_warp(replication_pad(in2, p, p, p, p), out.field.frame2());
  Var<Scalar> frame = blend(warped1, warped2, out.field.occlusion);
  if (pad_h != 0 || pad_w != 0) frame = crop(frame, 0, 0, s.h, s.w);
  out.frame = frame;
  return out;
}

template <typename Scalar>
Image interpolate(const Model<Scalar>& model, const Image& frame1, const Image& frame2) {
  if (!frame1.same_size(frame2)) {
    throw Error(ErrorKind::shape, "interpolate", "frame dimensions differ");
  }
  NoGradGuard no_grad;
  const Var<Scalar> a(to_tensor<Scalar>(frame1));
  const Var<Scalar> b(to_tensor<Scalar>(frame2));
  return to_image(synthesize(model, a, b).frame.value());
}

#define PRNET_INSTANTIATE_PIPELINE(S)                                                               \
  template Var<S> blend(const Var<S>&, const Var<S>&, const Var<S>&);                              \
  template Synthesis<S> synthesize(const Model<S>&, const Var<S>&, const Var<S>&, FeatureTrace<S>*); \
  template Image interpolate(const Model<S>&, const Image&, const Image&);

PRNET_INSTANTIATE_PIPELINE(float)
PRNET_INSTANTIATE_PIPELINE(double)

#undef PRNET_INSTANTIATE_PIPELINE

}  // namespace prnet
