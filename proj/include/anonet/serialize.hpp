#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "anonet/model.hpp"

namespace anonet {

/// Weight file layout (all integers and floats little-endian):
///
///   char[8]  magic "ANONETW1"
///   u32      format version (1)
///   u32      config-name length, then the name bytes
///   u32      provenance
///   u32      input normalization (0 none, 1 per-image mean removal)
///   u32      layer count L
///   L x layer record:
///            u32 kernel, u32 in_channels, u32 out_channels, u32 stride,
///            u8 activation, u8 batchnorm, u8 trainable, u8 init, u8 family,
///            u8 running_initialized, u16 reserved,
///            f64 bn_epsilon, f64 bn_momentum
///   L x payload, in layer order:
///            f32 weight[out*in*k*k], f32 bias[out],
///            and when batchnorm: f32 gamma[out], beta[out],
///                               running_mean[out], running_var[out]
///   u32      CRC-32 of every preceding byte
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> encode_weights(const Model& model);
Model decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const Model& model, const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path);
/// Loads into an existing model after checking every layer shape against it.
void load_weights_into(Model& model, const std::filesystem::path& path);

/// Standalone tensor file ("ANONETT1"): version, name, u32 dims[4], f32
/// values, CRC-32. Used for filter banks and raw score maps.
void write_tensor_file(const std::filesystem::path& path, const Tensor<float>& t,
                       const std::string& name);
Tensor<float> read_tensor_file(const std::filesystem::path& path, std::string* name = nullptr);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace anonet
