#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flim/image.hpp"

namespace flim {

/// Marker raster values: 0 = unmarked, 1 = background, 2 = object.
enum class MarkerClass : std::uint8_t { background = 1, object = 2 };

struct Marker {
  int id = 0;
  MarkerClass cls = MarkerClass::object;
  std::vector<Pixel> pixels;  // raster order, unique

  bool operator==(const Marker&) const = default;
};

struct MarkerSet {
  std::string image_id;
  int height = 0;
  int width = 0;
  std::vector<Marker> markers;

  std::size_t pixel_count() const noexcept;
  bool operator==(const MarkerSet&) const = default;
};

/// Single-channel 8-bit label raster, row-major.
struct LabelRaster {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;
};

/// Every 4-connected component of equal non-zero value becomes one marker.
/// Components are numbered in raster order of their first pixel. Values other
/// than 0, 1, 2 are rejected.
MarkerSet markers_from_raster(const LabelRaster& raster, std::string image_id);

LabelRaster markers_to_raster(const MarkerSet& markers);

/// Throws invalid_argument unless each marker is non-empty, 4-connected,
/// in bounds and pixel-disjoint from the others.
void validate_markers(const MarkerSet& markers);

/// Maps each marker pixel (i, j) to (i / stride, j / stride). Duplicates
/// inside a marker collapse and empty markers are dropped. Projected markers
/// may overlap each other.
MarkerSet project_markers(const MarkerSet& markers, int total_stride);

/// Per-channel mean and population standard deviation over the union of the
/// marker pixels of every image.
NormalizationStats marker_normalization_stats(std::span<const Image> images,
                                              std::span<const MarkerSet> markers,
                                              double epsilon = 1e-6);

}  // namespace flim
