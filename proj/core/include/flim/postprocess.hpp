#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "flim/image.hpp"

namespace flim {

/// Threshold used wherever a saliency map must become binary.
inline constexpr double kBinaryThreshold = 0.5;

/// Channel 0 >= threshold -> 1, else 0.
Image binarize(const Image& map, double threshold = kBinaryThreshold);

struct ComponentMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;         // 0 = background, components 1..count
  int count = 0;
  std::vector<std::size_t> areas;  // areas[l - 1] is the size of label l

  int label(int i, int j) const noexcept {
    return labels[static_cast<std::size_t>(i) * width + j];
  }
};

/// 8-connected labeling of the binarized map. Labels follow the raster order
/// of each component's first pixel.
ComponentMap connected_components(const Image& map, double threshold = kBinaryThreshold);

/// Zeroes components with area < min_area or > max_area; surviving pixels
/// keep their saliency.
Image size_filter(const Image& saliency, std::size_t min_area,
                  std::size_t max_area = std::numeric_limits<std::size_t>::max());

/// Exact squared Euclidean distance from every pixel to the nearest pixel of
/// `mask` (values >= 0.5). Pixels are at infinity when the mask is empty.
std::vector<double> squared_distance_transform(const Image& mask);

struct SeedSets {
  std::vector<Pixel> object;
  std::vector<Pixel> background;
};

/// Object seeds: erosion of the binarized map by a Euclidean disk of
/// `erosion_radius` (outside the image counts as background). Background
/// seeds: pixels farther than `dilation_radius` from the foreground.
SeedSets estimate_seeds(const Image& saliency, double erosion_radius = 1.0,
                        double dilation_radius = 30.0);

/// Seeded shortest-path forest on the 8-neighbour grid. Arc weight is the
/// Euclidean distance between pixel feature vectors, path cost is additive,
/// and each pixel takes the class of its cheapest root (background wins
/// equal costs). Seeds keep their class. With either seed set empty the
/// binarized input is returned.
Image seeded_delineation(const Image& img, const SeedSets& seeds);

struct PostprocessOptions {
  bool size_filter = false;
  std::size_t min_area = 100;
  std::size_t max_area = 160000;
  bool delineate = false;
  double erosion_radius = 1.0;
  double dilation_radius = 30.0;
};

/// Size filter, then (optionally) seed estimation and delineation on the
/// input image. Delineation yields a binary map; without it the (filtered)
/// saliency is returned.
Image postprocess(const Image& image, const Image& saliency, const PostprocessOptions& options);

}  // namespace flim
