#include <doctest.h>

#include <numeric>

#include "prnet/error.hpp"
#include "prnet/pipeline.hpp"
#include "prnet/viz.hpp"
#include "test_support.hpp"

using namespace prnet;

namespace {

Image solid(const Image& like, Rgb c) {
  Image out(like.width, like.height);
  for (int y = 0; y < like.height; ++y) {
    for (int x = 0; x < like.width; ++x) {
      for (int k = 0; k < 3; ++k) out.at(x, y, k) = c[k];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("colour ramps") {
  const auto occ = ColorRamp::occlusion();
  CHECK(occ(0.5) == Rgb{0, 255, 0});
  CHECK(occ(1.0) == Rgb{255, 0, 0});
  CHECK(occ(0.0) == Rgb{0, 0, 255});
  CHECK(occ(-3.0) == occ(0.0));
  const auto att = ColorRamp::attention();
  CHECK(att(0.0) == Rgb{0, 0, 255});
  CHECK(att(1.0) == Rgb{255, 0, 0});
  int prev_r = -1, prev_b = 256;
  for (int i = 0; i <= 100; ++i) {
    const Rgb c = att(i / 100.0);
    CHECK(c[0] >= prev_r);
    CHECK(c[2] <= prev_b);
    prev_r = c[0];
    prev_b = c[2];
  }
  CHECK_THROWS_AS(ColorRamp({{0.2, Rgb{}}, {1.0, Rgb{}}}), Error);
  CHECK(occlusion_legend().find("red") != std::string::npos);
}

TEST_CASE("render_occlusion") {
  const Shape s{1, 1, 5, 7};
  const Image half = render_occlusion(Tensor<double>(s, 0.5));
  CHECK(half.width == 7);
  CHECK(half.height == 5);
  CHECK(half == solid(half, Rgb{0, 255, 0}));
  CHECK(render_occlusion(Tensor<double>(s, 1.0)) == solid(half, Rgb{255, 0, 0}));
  CHECK(render_occlusion(Tensor<double>(s, 0.0)) == solid(half, Rgb{0, 0, 255}));
  CHECK(render_occlusion(Tensor<float>(s, 1.5f)) == solid(half, Rgb{255, 0, 0}));
  CHECK_THROWS_AS(render_occlusion(Tensor<double>(Shape{1, 2, 5, 7})), Error);
}

TEST_CASE("attention overlay") {
  const Image output(10, 6, 100);
  SUBCASE("flat psi draws mid-ramp") {
    const auto map = attention_overlay(Tensor<double>(Shape{1, 4, 3, 5}, 2.0), output);
    CHECK(map.degenerate);
    const Rgb mid = ColorRamp::attention()(0.5);
    Image expected = output;
    for (auto& p : expected.pixels) p = 0;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 10; ++x) {
        for (int k = 0; k < 3; ++k) expected.at(x, y, k) = static_cast<std::uint8_t>(std::lround(0.5 * mid[k] + 50.0));
      }
    }
    CHECK(map.overlay == expected);
  }
  SUBCASE("highest mean channel wins and is normalized") {
    Tensor<double> psi(Shape{1, 3, 3, 5}, 0.1);
    for (std::int64_t p = 0; p < 15; ++p) psi[15 + p] = 1.0 + 0.1 * static_cast<double>(p);
    const auto map = attention_overlay(psi, output);
    CHECK(map.channel == 1);
    CHECK_FALSE(map.degenerate);
    REQUIRE(map.scores.size() == 3);
    // Top-left holds the channel minimum, bottom-right its maximum.
    const Rgb lo = ColorRamp::attention()(0.0);
    const Rgb hi = ColorRamp::attention()(1.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(map.overlay.at(0, 0, k) == static_cast<std::uint8_t>(std::lround(0.5 * lo[k] + 50.0)));
      CHECK(map.overlay.at(9, 5, k) == static_cast<std::uint8_t>(std::lround(0.5 * hi[k] + 50.0)));
    }
  }
  SUBCASE("channel order does not matter") {
    const auto psi = prnet::test::uniform_tensor(Shape{1, 6, 3, 5}, 3, 0.0, 1.0);
    Tensor<double> permuted(psi.shape());
    const int order[] = {4, 2, 5, 0, 1, 3};
    for (int c = 0; c < 6; ++c) {
      for (std::int64_t p = 0; p < 15; ++p) permuted[c * 15 + p] = psi[order[c] * 15 + p];
    }
    const auto a = attention_overlay(psi, output);
    const auto b = attention_overlay(permuted, output);
    CHECK(a.overlay == b.overlay);
    CHECK(order[b.channel] == a.channel);
  }
  SUBCASE("psi must cover the output") {
    CHECK_THROWS_AS(attention_overlay(Tensor<double>(Shape{1, 2, 2, 5}), output), Error);
  }
}

TEST_CASE("attention and occlusion through the model") {
  const auto model = Model<float>::build(ModelConfig::prnet(1), 2);
  const Image grey(20, 12, 128);
  const auto flat = render_attention(model, grey, grey);
  CHECK(flat.overlay.width == 20);
  CHECK(flat.overlay.height == 12);
  CHECK(flat.output == grey);
  CHECK(flat.degenerate);

  Image a(20, 12), b(20, 12);
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    a.pixels[i] = static_cast<std::uint8_t>(i * 7);
    b.pixels[i] = static_cast<std::uint8_t>(i * 13);
  }
  const auto first = render_attention(model, a, b);
  const auto second = render_attention(model, a, b);
  CHECK(first.overlay == second.overlay);
  CHECK(first.overlay.width == first.output.width);

  const auto occ = occlusion_map(model, a, b);
  CHECK(occ.shape() == Shape{1, 1, 12, 20});
  CHECK(render_occlusion(occ).width == 20);
}

TEST_CASE("montage") {
  const Image a(4, 3, 10), b(5, 3, 20);
  const Image m = montage({&a, &b}, 2);
  CHECK(m.width == 11);
  CHECK(m.height == 3);
  CHECK(m.at(0, 0, 0) == 10);
  CHECK(m.at(4, 0, 0) == 255);
  CHECK(m.at(6, 2, 2) == 20);
  const Image tall(4, 4);
  CHECK_THROWS_AS(montage({&a, &tall}), Error);
}
