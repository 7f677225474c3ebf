#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "prnet/checkpoint.hpp"
#include "prnet/error.hpp"
#include "prnet/model.hpp"
#include "prnet/ops.hpp"
#include "test_support.hpp"

using namespace prnet;
using prnet::test::max_abs_diff;
using prnet::test::uniform_tensor;

namespace {

std::int64_t sum_dims(const std::vector<ParameterSpec>& specs, const std::string& prefix) {
  std::int64_t total = 0;
  for (const auto& s : specs) {
    if (s.name.rfind(prefix, 0) != 0) continue;
    std::int64_t n = 1;
    for (auto d : s.dims) n *= d;
    total += n;
  }
  return total;
}

template <typename S>
bool same_parameters(const Model<S>& a, const Model<S>& b) {
  if (a.parameters().size() != b.parameters().size()) return false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& pa = a.parameters()[i];
    const auto& pb = b.parameters()[i];
    if (pa.name != pb.name || pa.dims != pb.dims) return false;
    if (!(pa.var.value().array() == pb.var.value().array()).all()) return false;
  }
  return true;
}

Var<float> constant_frame(std::int64_t h, std::int64_t w, float v) {
  return Var<float>(Tensor<float>(Shape{1, 3, h, w}, v));
}

}  // namespace

TEST_CASE("parameter counts reproduce the published table") {
  CHECK(count_params(ModelConfig::prnet(1)) == 1931491);
  CHECK(count_params(ModelConfig::prnet(2)) == 2413123);
  CHECK(count_params(ModelConfig::prnet(3)) == 2894755);
  CHECK(count_params(ModelConfig::prnet(4)) == 3376387);
  CHECK(count_params(ModelConfig::prnet(4, true)) == 3376387);
  CHECK(count_params(ModelConfig::baseline()) == 21843427);
  for (int n = 1; n <= 4; ++n) {
    CHECK(count_params(ModelConfig::prnet(n)) == 1931491 + (n - 1) * 481632);
  }
}

TEST_CASE("layer plan breakdown") {
  const auto specs = parameter_specs(ModelConfig::prnet(2));
  CHECK(sum_dims(specs, "encoder.1.") == 481632);
  CHECK(sum_dims(specs, "encoder.2.") == 481632);
  CHECK(sum_dims(specs, "decoder.") == 774912);
  CHECK(sum_dims(specs, "subnet.occlusion.") == 111361);
  CHECK(sum_dims(specs, "subnet.") - 111361 == 563586);
  for (const char* s : {"subnet.weight1.", "subnet.alpha1.", "subnet.beta1.", "subnet.weight2.", "subnet.alpha2.",
                        "subnet.beta2."}) {
    CHECK(sum_dims(specs, s) == 93931);
  }

  const auto base = parameter_specs(ModelConfig::baseline());
  CHECK(sum_dims(base, "encoder.") == 7856736);
  CHECK(sum_dims(base, "decoder.") == 13311744);

  std::set<std::string> names;
  for (const auto& s : specs) CHECK(names.insert(s.name).second);
}

TEST_CASE("counting a built model agrees with the config count") {
  for (const auto& cfg : {ModelConfig::prnet(1), ModelConfig::prnet(3), ModelConfig::prnet(4, true)}) {
    CHECK(count_params(Model<float>::build(cfg, 1)) == count_params(cfg));
  }
}

TEST_CASE("reduction percentages") {
  const double expected[] = {91.2, 89.0, 86.7, 84.5};
  for (int n = 1; n <= 4; ++n) {
    CHECK(std::abs(reduction_percent(count_params(ModelConfig::prnet(n))) - expected[n - 1]) <= 0.05);
  }
  CHECK(reduction_percent(count_params(ModelConfig::baseline())) == 0.0);
}

TEST_CASE("layers removed from the baseline hold over 90 percent of its parameters") {
  const auto small = parameter_specs(ModelConfig::prnet(1));
  const auto base = parameter_specs(ModelConfig::baseline());
  std::set<std::string> kept;
  for (const auto& s : small) kept.insert(s.name);
  std::int64_t removed = 0;
  for (const auto& s : base) {
    if (kept.count(s.name)) continue;
    std::int64_t n = 1;
    for (auto d : s.dims) n *= d;
    removed += n;
  }
  CHECK(removed == 19764480);
  CHECK(static_cast<double>(removed) >= 0.9 * 21843427.0);
}

TEST_CASE("config validation and names") {
  CHECK_THROWS_AS(ModelConfig::prnet(3, true).validate(), Error);
  CHECK_THROWS_AS(ModelConfig::prnet(0).validate(), Error);
  CHECK_THROWS_AS(ModelConfig::prnet(5).validate(), Error);
  CHECK_THROWS_AS(Model<float>::build(ModelConfig::prnet(2, true), 0), Error);
  CHECK(ModelConfig::prnet(4, true).name() == "PRNet_4*");
  CHECK(ModelConfig::prnet(2).name() == "PRNet_2");
  CHECK(ModelConfig::baseline().name() == "AdaCoFNet");
  CHECK(ModelConfig::from_name("prnet_4*") == ModelConfig::prnet(4, true));
  CHECK(ModelConfig::from_name("baseline") == ModelConfig::baseline());
  CHECK_THROWS_AS(ModelConfig::from_name("resnet"), Error);
  const auto cfg = ModelConfig::prnet(4, true);
  CHECK(ModelConfig::from_json(cfg.to_json()) == cfg);
  for (int e = 0; e < 4; ++e) CHECK(cfg.quarter_turns(e) == e);
  CHECK(ModelConfig::prnet(4).quarter_turns(3) == 0);
}

TEST_CASE("build is deterministic in the seed") {
  const auto cfg = ModelConfig::prnet(4, true);
  const auto a = Model<float>::build(cfg, 7);
  const auto b = Model<float>::build(cfg, 7);
  const auto c = Model<float>::build(cfg, 8);
  CHECK(same_parameters(a, b));
  CHECK_FALSE(same_parameters(a, c));
  const auto* bias = a.find("encoder.1.block1.conv0.bias");
  REQUIRE(bias != nullptr);
  CHECK((bias->var.value().array() == 0.0f).all());
  CHECK(a.find("encoder.4.block3.conv2.weight") != nullptr);
  CHECK(a.find("encoder.5.block1.conv0.weight") == nullptr);
}

TEST_CASE("baseline layer plan") {
  const auto m = Model<float>::build(ModelConfig::baseline(), 0);
  CHECK(m.encoder.size() == 1);
  const std::int64_t widths[] = {32, 64, 128, 256, 512};
  for (int level = 0; level < 5; ++level) {
    CHECK(m.encoder[0][level].convs.size() == 3);
    CHECK(m.encoder[0][level].convs.back().out_channels() == widths[level]);
  }
  CHECK(m.deconv[4].convs.front().in_channels() == 512);
  CHECK(m.deconv[4].convs.back().out_channels() == 512);
  CHECK(m.deconv[3].convs.back().out_channels() == 256);
  CHECK(m.upsample[4].out_channels() == 512);
}

TEST_CASE("fuse_features") {
  SUBCASE("single encoder passes through") {
    const Var<double> m(uniform_tensor(Shape{1, 4, 6, 8}, 1, -1, 1));
    const auto f = fuse_features<double>({m}, {0});
    CHECK(max_abs_diff(f.value(), m.value()) == 0.0);
  }
  SUBCASE("rotated maps are turned back before summing") {
    const auto base = uniform_tensor(Shape{1, 2, 128, 96}, 2, -1, 1);
    std::vector<Var<double>> maps;
    for (int q = 0; q < 4; ++q) maps.push_back(rot90(Var<double>(base), q));
    CHECK(maps[1].shape() == Shape{1, 2, 96, 128});
    const auto f = fuse_features(maps, {0, 1, 2, 3});
    CHECK(f.shape() == Shape{1, 2, 128, 96});
    Tensor<double> four = base;
    four.array() *= 4.0;
    CHECK(max_abs_diff(f.value(), four) < 1e-12);
  }
  SUBCASE("mismatched shapes") {
    const Var<double> a(Tensor<double>(Shape{1, 2, 8, 6}));
    CHECK_THROWS_AS(fuse_features<double>({a, a}, {0, 1}), Error);
  }
}

TEST_CASE("forward_features shapes and ranges") {
  const auto model = Model<float>::build(ModelConfig::prnet(1), 3);
  const Var<float> f1(uniform_tensor<float>(Shape{1, 3, 64, 64}, 10, 0, 1));
  const Var<float> f2(uniform_tensor<float>(Shape{1, 3, 64, 64}, 11, 0, 1));
  NoGradGuard guard;
  FeatureTrace<float> trace;
  trace.fuse_level1 = true;
  const auto field = forward_features(model, f1, f2, &trace);
  for (const auto* v : {&field.weights1, &field.alpha1, &field.beta1, &field.weights2, &field.alpha2, &field.beta2}) {
    CHECK(v->shape() == Shape{1, 25, 64, 64});
  }
  CHECK(field.occlusion.shape() == Shape{1, 1, 64, 64});
  CHECK(trace.psi.shape() == Shape{1, 64, 32, 32});
  CHECK(trace.fused[0].shape() == Shape{1, 32, 64, 64});
  CHECK(trace.fused[2].shape() == Shape{1, 128, 16, 16});

  double worst = 0;
  for (const auto* w : {&field.weights1, &field.weights2}) {
    for (std::int64_t p = 0; p < 64 * 64; ++p) {
      double s = 0;
      for (std::int64_t c = 0; c < 25; ++c) {
        const float v = w->value()[c * 64 * 64 + p];
        CHECK(v >= 0.0f);
        s += v;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  CHECK(worst <= 1e-6 * 25);
  CHECK((field.occlusion.value().array() > 0.0f).all());
  CHECK((field.occlusion.value().array() < 1.0f).all());

  const auto again = forward_features(model, f1, f2);
  CHECK(max_abs_diff(again.alpha2.value(), field.alpha2.value()) == 0.0);

  CHECK_THROWS_AS(forward_features(model, constant_frame(60, 64, 0.5f), constant_frame(60, 64, 0.5f)), Error);
}

TEST_CASE("rotation bookkeeping on a non-square input") {
  const auto model = Model<float>::build(ModelConfig::prnet(4, true), 4);
  NoGradGuard guard;
  FeatureTrace<float> trace;
  forward_features(model, Var<float>(uniform_tensor<float>(Shape{1, 3, 32, 24}, 1, 0, 1)),
                   Var<float>(uniform_tensor<float>(Shape{1, 3, 32, 24}, 2, 0, 1)), &trace);
  for (int e = 0; e < 4; ++e) {
    CHECK(trace.maps[e][1].shape() == Shape{1, 64, 16, 12});
    CHECK(trace.maps[e][2].shape() == Shape{1, 128, 8, 6});
  }
  CHECK(trace.psi.shape() == Shape{1, 64, 16, 12});
}

TEST_CASE("constant input: shared encoder weights fuse to four times one encoder") {
  auto model = Model<double>::build(ModelConfig::prnet(4, true), 5);
  for (std::size_t e = 1; e < 4; ++e) {
    for (std::size_t level = 0; level < 3; ++level) {
      for (std::size_t i = 0; i < 3; ++i) {
        model.encoder[e][level].convs[i].weight.mutable_value() = model.encoder[0][level].convs[i].weight.value();
        model.encoder[e][level].convs[i].bias.mutable_value() = model.encoder[0][level].convs[i].bias.value();
      }
    }
  }
  NoGradGuard guard;
  FeatureTrace<double> trace;
  trace.fuse_level1 = true;
  const Var<double> f1(Tensor<double>(Shape{1, 3, 16, 16}, 0.3));
  const Var<double> f2(Tensor<double>(Shape{1, 3, 16, 16}, 0.7));
  forward_features(model, f1, f2, &trace);
  for (std::size_t level = 0; level < 3; ++level) {
    Tensor<double> four = trace.maps[0][level].value();
    four.array() *= 4.0;
    CHECK(max_abs_diff(trace.fused[level].value(), four) <= 1e-5);
    const auto& fused = trace.fused[level].value();
    const auto plane = fused.shape().plane();
    for (std::int64_t c = 0; c < fused.shape().c; ++c) {
      const auto ch = fused.array().segment(c * plane, plane);
      CHECK(ch.maxCoeff() - ch.minCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("PRNet_4 and PRNet_4* agree on constant input") {
  const auto plain = Model<float>::build(ModelConfig::prnet(4), 6);
  std::vector<Tensor<float>> values;
  for (const auto& p : plain.parameters()) values.push_back(p.var.value());
  const auto rotated = model_from_parameters<float>(ModelConfig::prnet(4, true), values);
  NoGradGuard guard;
  FeatureTrace<float> ta, tb;
  forward_features(plain, constant_frame(16, 24, 0.25f), constant_frame(16, 24, 0.5f), &ta);
  forward_features(rotated, constant_frame(16, 24, 0.25f), constant_frame(16, 24, 0.5f), &tb);
  CHECK(max_abs_diff(ta.psi.value(), tb.psi.value()) <= 1e-5);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "prnet_test_model";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.prnc";
  const auto model = Model<float>::build(ModelConfig::prnet(2), 9);
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint<float>(path);
  CHECK(loaded.config() == model.config());
  CHECK(count_params(loaded) == count_params(model));
  CHECK(same_parameters(model, loaded));
  CHECK(serialize_checkpoint(loaded) == serialize_checkpoint(model));

  NoGradGuard guard;
  const Var<float> f1(uniform_tensor<float>(Shape{1, 3, 16, 16}, 1, 0, 1));
  const Var<float> f2(uniform_tensor<float>(Shape{1, 3, 16, 16}, 2, 0, 1));
  const auto a = forward_features(model, f1, f2);
  const auto b = forward_features(loaded, f1, f2);
  CHECK(max_abs_diff(a.weights1.value(), b.weights1.value()) == 0.0);
  CHECK(max_abs_diff(a.occlusion.value(), b.occlusion.value()) == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed checkpoints are rejected") {
  const auto model = Model<float>::build(ModelConfig::prnet(1), 1);
  const auto bytes = serialize_checkpoint(model);

  auto flipped = bytes;
  flipped[1] ^= 0x20;
  CHECK_THROWS_AS(deserialize_checkpoint<float>(flipped), Error);
  try {
    deserialize_checkpoint<float>(flipped);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
  }

  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(deserialize_checkpoint<float>(version), Error);

  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 17);
  CHECK_THROWS_AS(deserialize_checkpoint<float>(truncated), Error);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_checkpoint<float>(trailing), Error);

  // A PRNet_1 payload under a PRNet_2 header: names run out early.
  auto wrong = serialize_checkpoint(Model<float>::build(ModelConfig::prnet(2), 1));
  const auto small = serialize_checkpoint(model);
  CHECK_THROWS_AS(deserialize_checkpoint<float>(std::vector<std::uint8_t>(wrong.begin(), wrong.begin() + small.size())),
                  Error);

  CHECK_THROWS_AS(load_checkpoint<float>("/nonexistent/prnet.prnc"), Error);
}
