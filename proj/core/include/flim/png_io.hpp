#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flim/image.hpp"
#include "flim/markers.hpp"

namespace flim {

using Bytes = std::vector<std::uint8_t>;

/// Decoded PNG samples scaled to [0, 1]: one channel for grayscale files,
/// three for colour ones. Alpha is dropped.
Image decode_png(std::span<const std::uint8_t> bytes);

/// Marker raster from a grayscale PNG (values 0, 1, 2 are checked later).
/// Colour files are accepted only when every pixel is gray.
LabelRaster decode_label_png(std::span<const std::uint8_t> bytes);

/// Ground truth: samples above 127 become 1, everything else 0.
Image decode_mask_png(std::span<const std::uint8_t> bytes);

/// 8-bit grayscale PNG of channel 0, each value stored as round(255 * clamp(v, 0, 1)).
Bytes encode_gray_png(const Image& map);

/// 8-bit grayscale or RGB PNG of a 1- or 3-channel image in [0, 1].
Bytes encode_png(const Image& img);

Bytes encode_label_png(const LabelRaster& raster);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Regular files with a .png extension, sorted by file name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace flim
