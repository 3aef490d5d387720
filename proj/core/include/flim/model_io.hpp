#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "flim/encoder.hpp"

namespace flim {

inline constexpr std::string_view kModelMagic = "FLIM1";
inline constexpr std::string_view kModelVersion = "1.0";

/// Container: magic, u32 little-endian header length, compact JSON header,
/// then per layer the tensors norm mean, norm stdev, kernel bank and (for
/// separable layers) depthwise and pointwise weights, each as a u32 element
/// count followed by little-endian float32 values.
std::vector<std::uint8_t> serialize_model(const Model& model);

/// Rejects anything serialize_model cannot have produced with a typed Error:
/// bad_magic, unsupported_version, malformed_header, truncated_blob or
/// invariant_violation.
Model deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace flim
