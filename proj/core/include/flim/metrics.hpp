#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flim/image.hpp"
#include "flim/numerics.hpp"

namespace flim {

struct WeightedFConfig {
  double beta2 = 1.0;
  int gaussian_size = 7;
  double gaussian_sigma = 5.0;    // 0 turns the smoothing into the identity
  bool distance_weighting = true; // false: false positives weigh 1 everywhere
};

/// Weighted F-measure of a saliency map against binary ground truth
/// (Margolin et al.). Errors outside the object borrow the error of their
/// nearest object pixel (lowest raster index on distance ties) before
/// Gaussian smoothing with zero padding; background errors grow with distance
/// to the object. An empty ground truth scores 1 when the map is all zero and
/// 0 otherwise.
double weighted_fmeasure(const Image& saliency, const Image& gt, const WeightedFConfig& config = {});

/// Mean absolute error in [0, 1].
double mae_raw(const Image& saliency, const Image& gt);

/// Mean absolute error scaled by 100.
double mae(const Image& saliency, const Image& gt);

struct ImageScore {
  std::string name;
  double fbw = 0.0;
  double mae = 0.0;  // x100 scale
};

struct Comparison {
  WilcoxonResult fbw;
  WilcoxonResult mae;
};

struct MetricReport {
  std::vector<ImageScore> per_image;
  double fbw = 0.0;  // mean of per-image values
  double mae = 0.0;
  std::optional<std::uint64_t> params;
  std::optional<double> gflops;
  std::optional<std::vector<ImageScore>> baseline;
  std::optional<Comparison> comparison;

  std::string to_json() const;
  /// Aligned columns: #Params, FLOPs(G), F^w_b, MAE.
  std::string to_table() const;
};

ImageScore score_image(std::string name, const Image& saliency, const Image& gt);

MetricReport summarize(std::vector<ImageScore> scores);

/// Adds the baseline scores and a paired signed-rank test per metric. Scores
/// are paired by position and must name the same images.
void compare_with(MetricReport& report, std::vector<ImageScore> baseline, double alpha = 0.05);

}  // namespace flim
