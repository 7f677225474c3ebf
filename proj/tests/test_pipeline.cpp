#include <doctest.h>

#include <random>

#include "prnet/error.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/ops.hpp"
#include "prnet/pipeline.hpp"
#include "test_support.hpp"

using namespace prnet;
using prnet::test::max_abs_diff;
using prnet::test::uniform_tensor;
using V = Var<double>;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(u(rng));
  return img;
}

}  // namespace

TEST_CASE("blend identities") {
  const auto x = uniform_tensor(Shape{2, 3, 5, 4}, 1, 0, 1);
  const auto y = uniform_tensor(Shape{2, 3, 5, 4}, 2, 0, 1);
  const auto v = uniform_tensor(Shape{2, 1, 5, 4}, 3, 0, 1);
  const Shape vs{2, 1, 5, 4};
  CHECK(max_abs_diff(blend(V(x), V(y), V(Tensor<double>(vs, 1.0))).value(), x) == 0.0);
  CHECK(max_abs_diff(blend(V(x), V(y), V(Tensor<double>(vs, 0.0))).value(), y) == 0.0);
  CHECK(max_abs_diff(blend(V(x), V(x), V(v)).value(), x) < 1e-15);

  Tensor<double> one_minus = v;
  one_minus.array() = 1.0 - v.array();
  CHECK(max_abs_diff(blend(V(x), V(y), V(v)).value(), blend(V(y), V(x), V(one_minus)).value()) <= 1e-15);

  CHECK_THROWS_AS(blend(V(x), V(Tensor<double>(Shape{2, 3, 5, 5})), V(v)), Error);
  CHECK_THROWS_AS(blend(V(x), V(y), V(Tensor<double>(Shape{2, 3, 5, 4}))), Error);
}

TEST_CASE("blend gradients") {
  const auto report = grad_check(
      [](const std::vector<V>& in) { return sum(mul(blend(in[0], in[1], in[2]), in[3])); },
      {uniform_tensor(Shape{1, 3, 3, 4}, 4, 0, 1), uniform_tensor(Shape{1, 3, 3, 4}, 5, 0, 1),
       uniform_tensor(Shape{1, 1, 3, 4}, 6, 0.1, 0.9), uniform_tensor(Shape{1, 3, 3, 4}, 7, -1, 1)});
  CHECK(report.worst() < 1e-6);
}

TEST_CASE("round_up") {
  CHECK(round_up(100, 8) == 104);
  CHECK(round_up(75, 8) == 80);
  CHECK(round_up(64, 8) == 64);
  CHECK(round_up(65, 32) == 96);
}

TEST_CASE("constant grey frames give constant grey output") {
  const auto model = Model<float>::build(ModelConfig::prnet(2), 11);
  const Image grey(40, 24, 128);
  const Image out = interpolate(model, grey, grey);
  CHECK(out == grey);
}

TEST_CASE("non-multiple sizes are padded and cropped back") {
  const auto model = Model<float>::build(ModelConfig::prnet(1), 12);
  const Image a = random_image(100, 75, 1);
  const Image b = random_image(100, 75, 2);
  const Image out = interpolate(model, a, b);
  CHECK(out.width == 100);
  CHECK(out.height == 75);

  NoGradGuard guard;
  const auto s = synthesize(model, Var<float>(to_tensor<float>(a)), Var<float>(to_tensor<float>(b)));
  CHECK(s.padded_height == 80);
  CHECK(s.padded_width == 104);
  CHECK(s.frame.shape() == Shape{1, 3, 75, 100});
  CHECK(s.frame.value().all_finite());
}

TEST_CASE("untrained model output stays within the input range") {
  const auto model = Model<float>::build(ModelConfig::prnet(1), 13);
  const Image a = random_image(32, 24, 3);
  const Image b = random_image(32, 24, 4);
  NoGradGuard guard;
  const auto fa = to_tensor<float>(a);
  const auto fb = to_tensor<float>(b);
  const auto s = synthesize(model, Var<float>(fa), Var<float>(fb));
  CHECK(s.frame.value().all_finite());
  for (std::int64_t c = 0; c < 3; ++c) {
    const auto plane = 32 * 24;
    const float lo = std::min(fa.array().segment(c * plane, plane).minCoeff(),
                              fb.array().segment(c * plane, plane).minCoeff());
    const float hi = std::max(fa.array().segment(c * plane, plane).maxCoeff(),
                              fb.array().segment(c * plane, plane).maxCoeff());
    const auto out = s.frame.value().array().segment(c * plane, plane);
    CHECK(out.minCoeff() >= lo - 1e-5f);
    CHECK(out.maxCoeff() <= hi + 1e-5f);
  }
  const Image img = interpolate(model, a, b);
  CHECK(img.pixels.size() == a.pixels.size());
}

TEST_CASE("padding is a no-op for multiples of eight") {
  const auto model = Model<double>::build(ModelConfig::prnet(1), 14);
  const auto fa = uniform_tensor(Shape{1, 3, 16, 24}, 5, 0, 1);
  const auto fb = uniform_tensor(Shape{1, 3, 16, 24}, 6, 0, 1);
  NoGradGuard guard;
  const auto s = synthesize(model, V(fa), V(fb));
  CHECK(s.padded_height == 16);
  CHECK(s.padded_width == 24);

  // Manual path without the size-multiple step.
  const auto field = forward_features(model, V(fa), V(fb));
  const int p = field.geometry.padding();
  const auto w1 = adacof_warp(replication_pad(V(fa), p, p, p, p), field.frame1());
  const auto w2 = adacof_warp(replication_pad(V(fb), p, p, p, p), field.frame2());
  CHECK(max_abs_diff(blend(w1, w2, field.occlusion).value(), s.frame.value()) == 0.0);
}

TEST_CASE("interpolate input validation") {
  const auto model = Model<float>::build(ModelConfig::prnet(1), 15);
  CHECK_THROWS_AS(interpolate(model, Image(16, 16), Image(16, 24)), Error);
  CHECK_THROWS_AS(interpolate(model, Image(7, 16), Image(7, 16)), Error);
}

TEST_CASE("baseline pads to multiples of 32") {
  const auto model = Model<float>::build(ModelConfig::baseline(), 16);
  NoGradGuard guard;
  const auto s = synthesize(model, Var<float>(Tensor<float>(Shape{1, 3, 40, 33}, 0.5f)),
                            Var<float>(Tensor<float>(Shape{1, 3, 40, 33}, 0.5f)));
  CHECK(s.padded_height == 64);
  CHECK(s.padded_width == 64);
  CHECK(s.frame.shape() == Shape{1, 3, 40, 33});
}

TEST_CASE("image quantization and png round trip") {
  CHECK(quantize(-0.2) == 0);
  CHECK(quantize(1.7) == 255);
  CHECK(quantize(0.5) == 128);
  CHECK(quantize(127.5 / 255.0) == 128);
  const Image a = random_image(9, 5, 21);
  CHECK(to_image(to_tensor<float>(a)) == a);
  const auto path = std::filesystem::temp_directory_path() / "prnet_test_png.png";
  write_png(a, path);
  CHECK(read_png(path) == a);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_png("/nonexistent/x.png"), Error);
}
