#include "prnet/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "prnet/error.hpp"
#include "prnet/ops.hpp"

namespace prnet {

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::prnet(int encoders, bool rotate) {
  ModelConfig c;
  c.variant = Variant::prnet;
  c.encoders = encoders;
  c.rotate = rotate;
  return c;
}

ModelConfig ModelConfig::baseline() {
  ModelConfig c;
  c.variant = Variant::adacof_baseline;
  return c;
}

void ModelConfig::validate() const {
  if (variant == Variant::prnet) {
    if (encoders < 1 || encoders > 4) {
      throw Error(ErrorKind::config, "build", "encoders must be in 1..4, got " + std::to_string(encoders));
    }
    if (rotate && encoders != 4) {
      throw Error(ErrorKind::config, "build", "rotation requires exactly 4 encoders, got " + std::to_string(encoders));
    }
  }
  geometry().validate("build");
}

ModelConfig ModelConfig::normalized() const {
  ModelConfig c = *this;
  if (variant == Variant::adacof_baseline) {
    c.encoders = 1;
    c.rotate = false;
  }
  return c;
}

std::string ModelConfig::name() const {
  if (variant == Variant::adacof_baseline) return "AdaCoFNet";
  return "PRNet_" + std::to_string(encoders) + (rotate ? "*" : "");
}

ModelConfig ModelConfig::from_name(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "baseline" || s == "adacofnet" || s == "adacof") return baseline();
  const std::string prefix = "prnet_";
  if (s.rfind(prefix, 0) == 0) {
    std::string rest = s.substr(prefix.size());
    bool rotate = false;
    if (!rest.empty() && rest.back() == '*') {
      rotate = true;
      rest.pop_back();
    }
    if (rest.size() == 1 && rest[0] >= '1' && rest[0] <= '4') {
      ModelConfig c = prnet(rest[0] - '0', rotate);
      c.validate();
      return c;
    }
  }
  throw Error(ErrorKind::config, "model", "unknown model variant '" + std::string(name) + "'");
}

std::string ModelConfig::to_json() const {
  const ModelConfig c = normalized();
  nlohmann::json j;
  j["variant"] = c.variant == Variant::prnet ? "prnet" : "adacof_baseline";
  j["encoders"] = c.encoders;
  j["rotate"] = c.rotate;
  j["kernel_size"] = c.kernel_size;
  j["dilation"] = c.dilation;
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "prnet") {
      c.variant = Variant::prnet;
    } else if (variant == "adacof_baseline") {
      c.variant = Variant::adacof_baseline;
    } else {
      throw Error(ErrorKind::format, "model_config", "unknown variant '" + variant + "'");
    }
    c.encoders = j.at("encoders").get<int>();
    c.rotate = j.at("rotate").get<bool>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.dilation = j.at("dilation").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "model_config", e.what());
  }
  c.validate();
  return c.normalized();
}

// ---------------------------------------------------------------------------
// Layer layout

namespace {

// Channel plan of the full five-level encoder; PRNet keeps the first three.
constexpr std::array<std::int64_t, 5> kLevelChannels = {32, 64, 128, 256, 512};
constexpr int kConvsPerBlock = 3;
constexpr const char* kKernelSubnetNames[6] = {"weight1", "alpha1", "beta1", "weight2", "alpha2", "beta2"};

template <typename Conv>
struct Layout {
  std::vector<std::vector<std::vector<Conv>>> encoder;  // [e][level][i]
  std::vector<std::vector<Conv>> deconv;                // [level][i]
  std::vector<Conv> upsample;                           // [level]
  std::array<std::vector<Conv>, 7> subnet_hidden;
  std::array<Conv, 7> subnet_output{};
};

// Walks the architecture in parameter registration order. `make(prefix, cin,
// cout)` creates one 3x3 conv layer.
template <typename Conv, typename Make>
Layout<Conv> lay_out(const ModelConfig& raw, Make&& make) {
  const ModelConfig config = raw.normalized();
  config.validate();
  const int levels = config.levels();
  const std::int64_t taps = config.geometry().taps();
  Layout<Conv> layout;
  layout.deconv.resize(static_cast<std::size_t>(levels));
  layout.upsample.resize(static_cast<std::size_t>(levels));

  for (int e = 0; e < config.encoders; ++e) {
    auto& stack = layout.encoder.emplace_back();
    std::int64_t cin = 6;
    for (int level = 1; level <= levels; ++level) {
      auto& block = stack.emplace_back();
      const std::int64_t cout = kLevelChannels[static_cast<std::size_t>(level - 1)];
      for (int i = 0; i < kConvsPerBlock; ++i) {
        block.push_back(make("encoder." + std::to_string(e + 1) + ".block" + std::to_string(level) + ".conv" +
                                 std::to_string(i),
                             i == 0 ? cin : cout, cout));
      }
      cin = cout;
    }
  }

  std::int64_t cin = kLevelChannels[static_cast<std::size_t>(levels - 1)];
  for (int level = levels; level >= 2; --level) {
    const std::int64_t cout = kLevelChannels[static_cast<std::size_t>(level - 1)];
    auto& block = layout.deconv[static_cast<std::size_t>(level - 1)];
    for (int i = 0; i < kConvsPerBlock; ++i) {
      block.push_back(make("decoder.deconv" + std::to_string(level) + ".conv" + std::to_string(i),
                           i == 0 ? cin : cout, cout));
    }
    layout.upsample[static_cast<std::size_t>(level - 1)] =
        make("decoder.upsample" + std::to_string(level) + ".conv", cout, cout);
    cin = cout;
  }

  const std::int64_t psi = kLevelChannels[1];
  for (int s = 0; s < 6; ++s) {
    const std::string prefix = std::string("subnet.") + kKernelSubnetNames[s];
    auto& hidden = layout.subnet_hidden[static_cast<std::size_t>(s)];
    hidden.push_back(make(prefix + ".conv0", psi, psi));
    hidden.push_back(make(prefix + ".conv1", psi, psi));
    hidden.push_back(make(prefix + ".conv2", psi, taps));
    layout.subnet_output[static_cast<std::size_t>(s)] = make(prefix + ".conv3", taps, taps);
  }
  auto& hidden = layout.subnet_hidden[6];
  for (int i = 0; i < 3; ++i) hidden.push_back(make("subnet.occlusion.conv" + std::to_string(i), psi, psi));
  layout.subnet_output[6] = make("subnet.occlusion.conv3", psi, 1);
  return layout;
}

// Uniform [0,1) from the top 53 bits; independent of the standard library's
// distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::int64_t count_params(const ModelConfig& config) {
  std::int64_t total = 0;
  lay_out<int>(config, [&total](const std::string&, std::int64_t cin, std::int64_t cout) {
    total += cout * cin * 9 + cout;
    return 0;
  });
  return total;
}

std::vector<ParameterSpec> parameter_specs(const ModelConfig& config) {
  std::vector<ParameterSpec> specs;
  lay_out<int>(config, [&specs](const std::string& prefix, std::int64_t cin, std::int64_t cout) {
    specs.push_back({prefix + ".weight", {cout, cin, 3, 3}});
    specs.push_back({prefix + ".bias", {cout}});
    return 0;
  });
  return specs;
}

double reduction_percent(std::int64_t params) {
  const double baseline = static_cast<double>(count_params(ModelConfig::baseline()));
  return 100.0 * (1.0 - static_cast<double>(params) / baseline);
}

// ---------------------------------------------------------------------------
// Layers

template <typename Scalar>
Var<Scalar> Conv3x3<Scalar>::operator()(const Var<Scalar>& x) const {
  return conv2d(x, weight, bias, 1, PadMode::replicate);
}

template <typename Scalar>
Var<Scalar> ConvBlock<Scalar>::operator()(Var<Scalar> x) const {
  for (const auto& conv : convs) x = relu(conv(x));
  return x;
}

template <typename Scalar>
Var<Scalar> Subnet<Scalar>::operator()(const Var<Scalar>& psi) const {
  return output(upsample_bilinear2(hidden(psi)));
}

// ---------------------------------------------------------------------------
// Model

template <typename Scalar>
void Model<Scalar>::assemble(std::uint64_t seed, bool initialize) {
  std::mt19937_64 rng(seed);
  parameters_.clear();
  auto make = [&](const std::string& prefix, std::int64_t cin, std::int64_t cout) {
    Tensor<Scalar> w(Shape{cout, cin, 3, 3});
    if (initialize) {
      // Kaiming-uniform, fan-in, ReLU gain.
      const double bound = std::sqrt(6.0 / static_cast<double>(cin * 9));
      for (auto& v : w.values()) v = static_cast<Scalar>((2.0 * unit_uniform(rng) - 1.0) * bound);
    }
    Conv3x3<Scalar> conv{Var<Scalar>(std::move(w), true), Var<Scalar>(Tensor<Scalar>(Shape{1, cout, 1, 1}), true)};
    parameters_.push_back({prefix + ".weight", {cout, cin, 3, 3}, conv.weight});
    parameters_.push_back({prefix + ".bias", {cout}, conv.bias});
    return conv;
  };
  auto layout = lay_out<Conv3x3<Scalar>>(config_, make);

  encoder.clear();
  for (auto& stack : layout.encoder) {
    auto& blocks = encoder.emplace_back();
    for (auto& convs : stack) blocks.push_back(ConvBlock<Scalar>{std::move(convs)});
  }
  deconv.clear();
  for (auto& convs : layout.deconv) deconv.push_back(ConvBlock<Scalar>{std::move(convs)});
  upsample = std::move(layout.upsample);
  for (std::size_t s = 0; s < 6; ++s) {
    kernel_subnets[s] = Subnet<Scalar>{ConvBlock<Scalar>{std::move(layout.subnet_hidden[s])},
                                       std::move(layout.subnet_output[s])};
  }
  occlusion_subnet =
      Subnet<Scalar>{ConvBlock<Scalar>{std::move(layout.subnet_hidden[6])}, std::move(layout.subnet_output[6])};
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config_ = config.normalized();
  model.assemble(seed, true);
  return model;
}

template <typename Scalar>
const Parameter<Scalar>* Model<Scalar>::find(std::string_view name) const {
  for (const auto& p : parameters_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename Scalar>
template <typename Other>
Model<Other> Model<Scalar>::cast() const {
  std::vector<Tensor<Other>> values;
  values.reserve(parameters_.size());
  for (const auto& p : parameters_) values.push_back(p.var.value().template cast<Other>());
  return model_from_parameters<Other>(config_, std::move(values));
}

template <typename Scalar>
Model<Scalar> model_from_parameters(const ModelConfig& config, std::vector<Tensor<Scalar>> values) {
  config.validate();
  Model<Scalar> model;
  model.config_ = config.normalized();
  model.assemble(0, false);
  if (values.size() != model.parameters_.size()) {
    throw Error(ErrorKind::shape, "model_from_parameters",
                "expected " + std::to_string(model.parameters_.size()) + " tensors, got " +
                    std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& param = model.parameters_[i];
    if (values[i].shape() != param.var.shape()) {
      throw Error(ErrorKind::shape, "model_from_parameters",
                  param.name + " expects " + param.var.shape().str() + ", got " + values[i].shape().str());
    }
    param.var.mutable_value() = std::move(values[i]);
  }
  return model;
}

template <typename Scalar>
std::int64_t count_params(const Model<Scalar>& model) {
  std::int64_t total = 0;
  for (const auto& p : model.parameters()) total += p.var.value().numel();
  return total;
}

// ---------------------------------------------------------------------------
// Forward

template <typename Scalar>
Var<Scalar> fuse_features(const std::vector<Var<Scalar>>& maps, const std::vector<int>& quarter_turns) {
  if (maps.empty() || maps.size() != quarter_turns.size()) {
    throw Error(ErrorKind::usage, "fuse_features", "need one rotation per map");
  }
  auto upright = [&](std::size_t e) {
    const int back = (4 - quarter_turns[e] % 4) % 4;
    return back == 0 ? maps[e] : rot90(maps[e], back);
  };
  Var<Scalar> fused = upright(0);
  for (std::size_t e = 1; e < maps.size(); ++e) {
    Var<Scalar> m = upright(e);
    if (m.shape() != fused.shape()) {
      throw Error(ErrorKind::shape, "fuse_features",
                  "encoder " + std::to_string(e + 1) + " map " + m.shape().str() + " does not match " +
                      fused.shape().str() + " after back-rotation");
    }
    fused = add(fused, m);
  }
  return fused;
}

template <typename Scalar>
KernelField<Scalar> forward_features(const Model<Scalar>& model, const Var<Scalar>& frame1,
                                     const Var<Scalar>& frame2, FeatureTrace<Scalar>* trace) {
  const ModelConfig& config = model.config();
  const Shape s = frame1.shape();
  if (frame2.shape() != s || s.c != 3) {
    throw Error(ErrorKind::shape, "forward_features",
                "frames must be matching [N,3,H,W], got " + s.str() + " and " + frame2.shape().str());
  }
  const int multiple = config.size_multiple();
  if (s.h == 0 || s.w == 0 || s.h % multiple != 0 || s.w % multiple != 0) {
    throw Error(ErrorKind::shape, "forward_features",
                "height and width must be positive multiples of " + std::to_string(multiple) + ", got " + s.str());
  }

  const int levels = config.levels();
  const bool keep_level1 = trace != nullptr && trace->fuse_level1;
  const Var<Scalar> stacked = concat_channels<Scalar>({frame1, frame2});

  std::vector<std::vector<Var<Scalar>>> per_level(static_cast<std::size_t>(levels));
  std::vector<int> turns;
  for (std::size_t e = 0; e < model.encoder.size(); ++e) {
    const int q = config.quarter_turns(static_cast<int>(e));
    turns.push_back(q);
    Var<Scalar> h = q == 0 ? stacked : rot90(stacked, q);
    for (int level = 0; level < levels; ++level) {
      if (level > 0) h = avg_pool2(h);
      h = model.encoder[e][static_cast<std::size_t>(level)](h);
      if (level > 0 || keep_level1) per_level[static_cast<std::size_t>(level)].push_back(h);
    }
  }

  std::vector<Var<Scalar>> fused(static_cast<std::size_t>(levels));
  for (int level = keep_level1 ? 0 : 1; level < levels; ++level) {
    fused[static_cast<std::size_t>(level)] = fuse_features(per_level[static_cast<std::size_t>(level)], turns);
  }

  Var<Scalar> x = avg_pool2(fused.back());
  for (int level = levels - 1; level >= 1; --level) {
    const auto l = static_cast<std::size_t>(level);
    const Var<Scalar> d = model.deconv[l](x);
    x = add(relu(model.upsample[l](upsample_bilinear2(d))), fused[l]);
  }
  const Var<Scalar>& psi = x;

  if (trace != nullptr) {
    trace->maps.assign(model.encoder.size(), {});
    for (std::size_t e = 0; e < model.encoder.size(); ++e) {
      trace->maps[e].resize(static_cast<std::size_t>(levels));
      const int back = (4 - turns[e]) % 4;
      for (int level = keep_level1 ? 0 : 1; level < levels; ++level) {
        const Var<Scalar>& m = per_level[static_cast<std::size_t>(level)][e];
        trace->maps[e][static_cast<std::size_t>(level)] = back == 0 ? m : rot90(m, back);
      }
    }
    trace->fused = fused;
    trace->psi = psi;
  }

  KernelField<Scalar> field;
  field.geometry = config.geometry();
  field.weights1 = channel_softmax(model.kernel_subnets[0](psi));
  field.alpha1 = model.kernel_subnets[1](psi);
  field.beta1 = model.kernel_subnets[2](psi);
  field.weights2 = channel_softmax(model.kernel_subnets[3](psi));
  field.alpha2 = model.kernel_subnets[4](psi);
  field.beta2 = model.kernel_subnets[5](psi);
  field.occlusion = sigmoid(model.occlusion_subnet(psi));
  return field;
}

#define PRNET_INSTANTIATE_MODEL(S)                                                                       \
  template struct Conv3x3<S>;                                                                           \
  template struct ConvBlock<S>;                                                                         \
  template struct Subnet<S>;                                                                            \
  template class Model<S>;                                                                              \
  template Model<S> model_from_parameters(const ModelConfig&, std::vector<Tensor<S>>);                   \
  template std::int64_t count_params(const Model<S>&);                                                  \
  template Var<S> fuse_features(const std::vector<Var<S>>&, const std::vector<int>&);                    \
  template KernelField<S> forward_features(const Model<S>&, const Var<S>&, const Var<S>&, FeatureTrace<S>*);

PRNET_INSTANTIATE_MODEL(float)
PRNET_INSTANTIATE_MODEL(double)

#undef PRNET_INSTANTIATE_MODEL

template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace prnet
