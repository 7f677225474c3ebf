#include <doctest.h>

#include <cmath>

#include "prnet/error.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/ops.hpp"
#include "prnet/reference.hpp"
#include "test_support.hpp"

using namespace prnet;
using prnet::test::max_abs_diff;
using prnet::test::random_tensor;
using V = Var<double>;

TEST_CASE("tensor rejects non-finite external input") {
  const std::vector<double> values = {1.0, std::nan(""), 2.0, 3.0};
  CHECK_THROWS_AS(Tensor<double>::from_values(Shape{1, 1, 2, 2}, values), Error);
  CHECK_THROWS_AS(Tensor<double>::from_values(Shape{1, 1, 2, 3}, std::vector<double>{1, 2}), Error);
  const auto ok = Tensor<double>::from_values(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(ok(0, 0, 1, 0) == 3.0);
}

TEST_CASE("conv2d counts overlapped ones with zero padding") {
  const V x(Tensor<double>(Shape{1, 1, 3, 3}, 1.0));
  const V w(Tensor<double>(Shape{1, 1, 3, 3}, 1.0));
  const V b(Tensor<double>(Shape{1, 1, 1, 1}, 0.0));
  const auto y = conv2d(x, w, b).value();
  CHECK(y(0, 0, 1, 1) == 9.0);
  CHECK(y(0, 0, 0, 0) == 4.0);
  CHECK(y(0, 0, 2, 2) == 4.0);
  CHECK(y(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d with a centre one-hot kernel is the identity") {
  for (PadMode mode : {PadMode::zeros, PadMode::replicate}) {
    const V x(random_tensor(Shape{2, 1, 5, 7}, 3));
    Tensor<double> k(Shape{1, 1, 3, 3});
    k(0, 0, 1, 1) = 1.0;
    const auto y = conv2d(x, V(k), V(Tensor<double>(Shape{1, 1, 1, 1})), 1, mode).value();
    CHECK(max_abs_diff(y, x.value()) == 0.0);
  }
}

TEST_CASE("conv2d matches direct evaluation in both padding modes") {
  const auto x = random_tensor(Shape{2, 5, 7, 9}, 11);
  const auto w = random_tensor(Shape{4, 5, 3, 3}, 12);
  const auto b = random_tensor(Shape{1, 4, 1, 1}, 13);
  for (PadMode mode : {PadMode::zeros, PadMode::replicate}) {
    const auto fast = conv2d(V(x), V(w), V(b), 1, mode).value();
    CHECK(max_abs_diff(fast, reference::conv2d(x, w, b, mode)) < 1e-12);
  }
}

TEST_CASE("conv2d replicate padding preserves constant fields") {
  const V x(Tensor<double>(Shape{1, 2, 6, 4}, 0.5));
  const auto w = random_tensor(Shape{3, 2, 3, 3}, 5);
  const auto y = conv2d(x, V(w), V(Tensor<double>(Shape{1, 3, 1, 1}, 0.25)), 1, PadMode::replicate).value();
  for (std::int64_t c = 0; c < 3; ++c) {
    double expected = 0.25;
    for (std::int64_t i = 0; i < 2 * 9; ++i) expected += 0.5 * w[c * 18 + i];
    for (std::int64_t p = 0; p < 24; ++p) CHECK(y[c * 24 + p] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("conv2d reports channel mismatch with both shapes") {
  const V x(Tensor<double>(Shape{1, 3, 4, 4}));
  const V w(Tensor<double>(Shape{2, 4, 3, 3}));
  const V b(Tensor<double>(Shape{1, 2, 1, 1}));
  try {
    conv2d(x, w, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape);
    CHECK(e.op() == "conv2d");
    const std::string msg = e.what();
    CHECK(msg.find("[1,3,4,4]") != std::string::npos);
    CHECK(msg.find("[2,4,3,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d(x, V(Tensor<double>(Shape{2, 3, 3, 3})), b, 0), Error);
}

TEST_CASE("conv2d gradients match finite differences") {
  for (PadMode mode : {PadMode::zeros, PadMode::replicate}) {
    const auto report = grad_check(
        [mode](const std::vector<V>& in) { return sum(mul(conv2d(in[0], in[1], in[2], 1, mode), in[3])); },
        {random_tensor(Shape{2, 3, 6, 6}, 1), random_tensor(Shape{4, 3, 3, 3}, 2),
         random_tensor(Shape{1, 4, 1, 1}, 3), random_tensor(Shape{2, 4, 6, 6}, 4)});
    CHECK(report.worst() < 1e-4);
  }
}

TEST_CASE("avg_pool2") {
  const auto x = Tensor<double>::from_values(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(avg_pool2(V(x)).value()[0] == 2.5);
  const auto c = avg_pool2(V(Tensor<double>(Shape{1, 2, 4, 6}, 0.7))).value();
  CHECK(c.shape() == Shape{1, 2, 2, 3});
  for (double v : c.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(avg_pool2(V(Tensor<double>(Shape{1, 1, 3, 4}))), Error);
  const auto report = grad_check([](const std::vector<V>& in) { return sum(mul(avg_pool2(in[0]), in[1])); },
                                 {random_tensor(Shape{1, 2, 4, 4}, 7), random_tensor(Shape{1, 2, 2, 2}, 8)});
  CHECK(report.worst() < 1e-4);
}

TEST_CASE("upsample_bilinear2") {
  const auto x = Tensor<double>::from_values(Shape{1, 1, 1, 2}, std::vector<double>{0, 1});
  const auto y = upsample_bilinear2(V(x)).value();
  REQUIRE(y.shape() == Shape{1, 1, 2, 4});
  const double expected[4] = {0.0, 0.25, 0.75, 1.0};
  for (int r = 0; r < 2; ++r) {
    for (int j = 0; j < 4; ++j) CHECK(y(0, 0, r, j) == doctest::Approx(expected[j]).epsilon(1e-15));
  }
  const auto c = upsample_bilinear2(V(Tensor<double>(Shape{1, 1, 3, 2}, -0.3))).value();
  for (double v : c.values()) CHECK(v == -0.3);
  const auto report = grad_check([](const std::vector<V>& in) { return sum(mul(upsample_bilinear2(in[0]), in[1])); },
                                 {random_tensor(Shape{1, 1, 3, 3}, 9), random_tensor(Shape{1, 1, 6, 6}, 10)});
  CHECK(report.worst() < 1e-4);
}

TEST_CASE("pool then upsample preserves constants") {
  const auto y = upsample_bilinear2(avg_pool2(V(Tensor<double>(Shape{2, 3, 8, 4}, 0.125)))).value();
  for (double v : y.values()) CHECK(v == 0.125);
}

TEST_CASE("rot90 turns counter-clockwise") {
  // [[1 2 3]
  //  [4 5 6]]  -> [[3 6] [2 5] [1 4]]
  const auto x = Tensor<double>::from_values(Shape{1, 1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto y = rot90(V(x), 1).value();
  REQUIRE(y.shape() == Shape{1, 1, 3, 2});
  const std::vector<double> expected = {3, 6, 2, 5, 1, 4};
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(y[static_cast<std::int64_t>(i)] == expected[i]);
  const auto y2 = rot90(V(x), 2).value();
  CHECK(y2.shape() == Shape{1, 1, 2, 3});
  CHECK(y2[0] == 6.0);
  CHECK(y2[5] == 1.0);
  const auto y3 = rot90(V(x), 3).value();
  const std::vector<double> expected3 = {4, 1, 5, 2, 6, 3};
  for (std::size_t i = 0; i < expected3.size(); ++i) CHECK(y3[static_cast<std::int64_t>(i)] == expected3[i]);
}

TEST_CASE("rot90 by a then 4-a is the identity") {
  const V x(random_tensor(Shape{2, 3, 4, 7}, 21));
  for (int a = 0; a < 4; ++a) {
    const auto back = rot90(rot90(x, a), (4 - a) % 4).value();
    CHECK(back.shape() == x.shape());
    CHECK(max_abs_diff(back, x.value()) == 0.0);
  }
  CHECK(max_abs_diff(rot90(x, 0).value(), x.value()) == 0.0);
  const auto report = grad_check([](const std::vector<V>& in) { return sum(mul(rot90(in[0], 1), in[1])); },
                                 {random_tensor(Shape{1, 2, 3, 5}, 22), random_tensor(Shape{1, 2, 5, 3}, 23)});
  CHECK(report.worst() < 1e-4);
}

TEST_CASE("channel_softmax") {
  const auto u = channel_softmax(V(Tensor<double>(Shape{1, 4, 2, 2}, 3.0))).value();
  for (double v : u.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  const auto r = channel_softmax(V(random_tensor(Shape{2, 25, 3, 5}, 31, 0.0, 8.0))).value();
  for (std::int64_t n = 0; n < 2; ++n) {
    for (std::int64_t p = 0; p < 15; ++p) {
      double total = 0;
      for (std::int64_t c = 0; c < 25; ++c) {
        const double v = r(n, c, p / 5, p % 5);
        CHECK(v > 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }

  Tensor<double> spike(Shape{1, 25, 1, 1});
  spike[7] = 50.0;
  // Closed form: e^50 / (e^50 + 24) = 1 - 24 / (e^50 + 24).
  const double closed = 1.0 - 24.0 / (std::exp(50.0) + 24.0);
  const auto s = channel_softmax(V(spike)).value();
  CHECK(s[7] >= 1.0 - 1e-12);
  CHECK(s[7] == doctest::Approx(closed).epsilon(1e-15));

  const auto report = grad_check([](const std::vector<V>& in) { return sum(mul(channel_softmax(in[0]), in[1])); },
                                 {random_tensor(Shape{1, 5, 3, 3}, 32), random_tensor(Shape{1, 5, 3, 3}, 33)});
  CHECK(report.worst() < 1e-4);
}

TEST_CASE("elementwise ops and their gradients") {
  const auto a = random_tensor(Shape{1, 2, 3, 4}, 41);
  const auto b = random_tensor(Shape{1, 2, 3, 4}, 42);
  CHECK(grad_check([](const std::vector<V>& in) { return sum(relu(in[0])); }, {a}).worst() < 1e-6);
  CHECK(grad_check([](const std::vector<V>& in) { return sum(mul(sigmoid(in[0]), in[1])); }, {a, b}).worst() < 1e-4);
  CHECK(grad_check([](const std::vector<V>& in) { return sum(mul(add(in[0], in[1]), in[1])); }, {a, b}).worst() <
        1e-4);
  CHECK_THROWS_AS(add(V(a), V(Tensor<double>(Shape{1, 2, 4, 3}))), Error);
  CHECK_THROWS_AS(mul(V(a), V(Tensor<double>(Shape{1, 1, 3, 4}))), Error);

  const auto s = sigmoid(V(Tensor<double>::from_values(Shape{1, 1, 1, 3}, std::vector<double>{-800, 0, 800}))).value();
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 0.5);
  CHECK(s[2] == 1.0);
}

TEST_CASE("replication_pad, crop and concat") {
  const auto x = Tensor<double>::from_values(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto p = replication_pad(V(x), 1, 2, 0, 1).value();
  REQUIRE(p.shape() == Shape{1, 1, 3, 5});
  const std::vector<double> expected = {1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 3, 3, 4, 4, 4};
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(p[static_cast<std::int64_t>(i)] == expected[i]);

  const auto c = replication_pad(V(Tensor<double>(Shape{1, 2, 3, 3}, 0.4)), 2, 2, 2, 2).value();
  for (double v : c.values()) CHECK(v == 0.4);

  CHECK(grad_check([](const std::vector<V>& in) { return sum(mul(replication_pad(in[0], 2, 1, 1, 2), in[1])); },
                   {random_tensor(Shape{1, 2, 3, 4}, 51), random_tensor(Shape{1, 2, 6, 7}, 52)})
            .worst() < 1e-4);
  CHECK(grad_check([](const std::vector<V>& in) { return sum(mul(crop(in[0], 1, 2, 2, 3), in[1])); },
                   {random_tensor(Shape{1, 2, 4, 6}, 53), random_tensor(Shape{1, 2, 2, 3}, 54)})
            .worst() < 1e-4);
  CHECK_THROWS_AS(crop(V(x), 1, 1, 2, 2), Error);

  const auto cat = concat_channels<double>({V(x), V(Tensor<double>(Shape{1, 2, 2, 2}, 9.0))}).value();
  CHECK(cat.shape() == Shape{1, 3, 2, 2});
  CHECK(cat(0, 0, 1, 1) == 4.0);
  CHECK(cat(0, 2, 0, 0) == 9.0);
  CHECK(grad_check([](const std::vector<V>& in) { return sum(mul(concat_channels(std::vector<V>{in[0], in[1]}), in[2])); },
                   {random_tensor(Shape{2, 1, 2, 3}, 55), random_tensor(Shape{2, 2, 2, 3}, 56),
                    random_tensor(Shape{2, 3, 2, 3}, 57)})
            .worst() < 1e-4);
}

TEST_CASE("l1_loss") {
  const auto a = random_tensor(Shape{1, 3, 4, 4}, 61);
  CHECK(l1_loss(V(a), V(a)).value()[0] == 0.0);
  Tensor<double> shifted = a;
  shifted.array() += 0.5;
  CHECK(l1_loss(V(a), V(shifted)).value()[0] == doctest::Approx(0.5).epsilon(1e-12));

  // Exact tie: subgradient 0.
  V p(a, true);
  l1_loss(p, V(a)).backward();
  CHECK(p.grad().array().abs().maxCoeff() == 0.0);

  auto target = random_tensor(Shape{2, 4, 6, 6}, 62);
  target.array() += 3.0;
  const auto report = grad_check(
      [&target](const std::vector<V>& in) { return l1_loss(conv2d(in[0], in[1], in[2]), V(target)); },
      {random_tensor(Shape{2, 3, 6, 6}, 63), random_tensor(Shape{4, 3, 3, 3}, 64), random_tensor(Shape{1, 4, 1, 1}, 65)});
  CHECK(report.worst() < 1e-4);
}

TEST_CASE("grad_check rejects non-scalar functions") {
  CHECK_THROWS_AS(grad_check([](const std::vector<V>& in) { return relu(in[0]); }, {random_tensor(Shape{1, 1, 2, 2}, 1)}),
                  Error);
}

TEST_CASE("no-grad mode records nothing") {
  V x(random_tensor(Shape{1, 1, 2, 2}, 71), true);
  {
    NoGradGuard guard;
    const V y = relu(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->inputs.empty());
  }
  CHECK(relu(x).requires_grad());
}

TEST_CASE("backward accumulates through shared subexpressions") {
  V x(Tensor<double>(Shape{1, 1, 1, 1}, 3.0), true);
  const V y = mul(x, x);
  sum(add(y, x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(7.0));
}
