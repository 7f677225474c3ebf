#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "prnet/adacof.hpp"
#include "prnet/autograd.hpp"

namespace prnet {

enum class Variant { prnet, adacof_baseline };

/// Architecture descriptor.
///
/// `prnet` is the three-level UNet with `encoders` parallel encoder stacks
/// whose per-level maps are summed into the decoder skips; `rotate` feeds
/// encoder e an input turned by (e-1) quarter turns (only valid with four
/// encoders). `adacof_baseline` is the single five-level encoder network and
/// ignores `encoders` and `rotate`.
struct ModelConfig {
  Variant variant = Variant::prnet;
  int encoders = 1;
  bool rotate = false;
  int kernel_size = 5;
  int dilation = 1;

  static ModelConfig prnet(int encoders, bool rotate = false);
  static ModelConfig baseline();

  void validate() const;
  /// Canonical form: the baseline always reports one unrotated encoder.
  ModelConfig normalized() const;
  /// Display name, e.g. "PRNet_4*" or "AdaCoFNet".
  std::string name() const;
  /// Parses display names (case-insensitive "prnet_3", "PRNet_4*", "baseline", "adacofnet").
  static ModelConfig from_name(std::string_view name);

  int levels() const { return variant == Variant::prnet ? 3 : 5; }
  /// Input height and width must be multiples of this.
  int size_multiple() const { return 1 << levels(); }
  int quarter_turns(int encoder) const { return rotate ? encoder % 4 : 0; }
  WarpGeometry geometry() const { return {kernel_size, dilation}; }

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct Parameter {
  std::string name;
  std::vector<std::int64_t> dims;  // declared shape; biases are rank 1
  Var<Scalar> var;
};

/// 3x3 same-size convolution with edge-replicated borders.
template <typename Scalar>
struct Conv3x3 {
  Var<Scalar> weight;
  Var<Scalar> bias;

  Var<Scalar> operator()(const Var<Scalar>& x) const;
  std::int64_t in_channels() const { return weight.shape().c; }
  std::int64_t out_channels() const { return weight.shape().n; }
};

/// Convolutions, each followed by ReLU.
template <typename Scalar>
struct ConvBlock {
  std::vector<Conv3x3<Scalar>> convs;
  Var<Scalar> operator()(Var<Scalar> x) const;
};

/// Head producing one per-pixel field at twice the input resolution:
/// `hidden` conv+ReLU layers, bilinear x2, then a final conv.
template <typename Scalar>
struct Subnet {
  ConvBlock<Scalar> hidden;
  Conv3x3<Scalar> output;
  Var<Scalar> operator()(const Var<Scalar>& psi) const;
};

/// Per-pixel warp parameters for both frames plus the occlusion map.
template <typename Scalar>
struct KernelField {
  Var<Scalar> weights1, alpha1, beta1;
  Var<Scalar> weights2, alpha2, beta2;
  Var<Scalar> occlusion;
  WarpGeometry geometry{};

  WarpParams<Scalar> frame1() const { return {weights1, alpha1, beta1, geometry}; }
  WarpParams<Scalar> frame2() const { return {weights2, alpha2, beta2, geometry}; }
};

/// Optional intermediate outputs of forward_features.
template <typename Scalar>
struct FeatureTrace {
  bool fuse_level1 = false;                     // also compute the level-1 fused map
  std::vector<std::vector<Var<Scalar>>> maps;   // [encoder][level-1], back-rotated to 0 degrees
  std::vector<Var<Scalar>> fused;               // [level-1]; level 1 empty unless fuse_level1
  Var<Scalar> psi;                              // map feeding the seven subnets
};

/// Network weights and structure. Movable, not copyable: layers and the
/// parameter registry alias the same Var nodes.
template <typename Scalar>
class Model {
 public:
  static Model build(const ModelConfig& config, std::uint64_t seed);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const std::vector<Parameter<Scalar>>& parameters() const { return parameters_; }
  std::vector<Parameter<Scalar>>& parameters() { return parameters_; }
  const Parameter<Scalar>* find(std::string_view name) const;

  /// Deep copy converted to another scalar type.
  template <typename Other>
  Model<Other> cast() const;

  // Layer layout. encoder[e][level-1]; decoder blocks indexed by level-1
  // (entries for level 1 are unused).
  std::vector<std::vector<ConvBlock<Scalar>>> encoder;
  std::vector<ConvBlock<Scalar>> deconv;
  std::vector<Conv3x3<Scalar>> upsample;
  std::array<Subnet<Scalar>, 6> kernel_subnets;  // weights1, alpha1, beta1, weights2, alpha2, beta2
  Subnet<Scalar> occlusion_subnet;

 private:
  Model() = default;
  void assemble(std::uint64_t seed, bool initialize);

  template <typename>
  friend class Model;
  template <typename S>
  friend Model<S> model_from_parameters(const ModelConfig&, std::vector<Tensor<S>>);

  ModelConfig config_{};
  std::vector<Parameter<Scalar>> parameters_;
};

/// Builds a model with the given config whose parameters take `values` in
/// registration order. Shapes must match.
template <typename Scalar>
Model<Scalar> model_from_parameters(const ModelConfig& config, std::vector<Tensor<Scalar>> values);

struct ParameterSpec {
  std::string name;
  std::vector<std::int64_t> dims;
};

/// Parameter names and declared shapes in registration order.
std::vector<ParameterSpec> parameter_specs(const ModelConfig& config);

/// Total trainable element count.
template <typename Scalar>
std::int64_t count_params(const Model<Scalar>& model);

/// Exact trainable element count for a configuration, without allocating weights.
std::int64_t count_params(const ModelConfig& config);

/// Percentage of parameters removed relative to the baseline network.
double reduction_percent(std::int64_t params);

/// Sums per-encoder maps after rotating each back to 0 degrees; map e was
/// computed from an input turned by quarter_turns[e].
template <typename Scalar>
Var<Scalar> fuse_features(const std::vector<Var<Scalar>>& maps, const std::vector<int>& quarter_turns);

/// Runs encoders, fusion, decoder and subnets. Frames are [N,3,H,W] with H
/// and W multiples of config().size_multiple().
template <typename Scalar>
KernelField<Scalar> forward_features(const Model<Scalar>& model, const Var<Scalar>& frame1,
                                     const Var<Scalar>& frame2, FeatureTrace<Scalar>* trace = nullptr);

}  // namespace prnet
