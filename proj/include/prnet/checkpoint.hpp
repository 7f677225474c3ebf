#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prnet/model.hpp"

namespace prnet {

// Binary layout, all integers little-endian:
//   "PRNC" | u32 version (1) | u32 header length | UTF-8 JSON ModelConfig
//   then per parameter, in registration order:
//   u16 name length | UTF-8 name | u8 dtype (0 = f32) | u8 rank | rank x u32 dims | f32 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
std::vector<std::uint8_t> serialize_checkpoint(const Model<Scalar>& model);

/// Parses and validates a whole archive before constructing the model;
/// malformed input never yields a partially loaded model.
template <typename Scalar>
Model<Scalar> deserialize_checkpoint(std::span<const std::uint8_t> bytes);

template <typename Scalar>
void save_checkpoint(const Model<Scalar>& model, const std::filesystem::path& path);

template <typename Scalar>
Model<Scalar> load_checkpoint(const std::filesystem::path& path);

}  // namespace prnet
