#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flim/encoder.hpp"
#include "flim/image.hpp"

namespace flim {

/// Margin subtracted/added around the Otsu threshold of the channel means.
enum class DecoderMargin { variance, stdev };

/// How layer activations are brought to [0, 1] before adaptation.
enum class FeatureScaling { per_channel, global };

struct DecoderConfig {
  DecoderMargin margin = DecoderMargin::variance;
  double foreground_ratio_min = 0.1;  // psi must exceed this for a foreground channel
  double background_ratio_max = 0.2;  // psi must stay below this for a background channel
  FeatureScaling scaling = FeatureScaling::per_channel;
};

struct DecoderWeights {
  std::vector<int> alpha;     // -1, 0 or +1 per channel
  std::vector<double> means;  // mean activation per channel
  std::vector<double> psi;    // foreground ratio per channel
  double tau = 0.0;           // Otsu threshold of the channel means
  double sigma2 = 0.0;        // population variance of the channel means
  double margin = 0.0;        // sigma2, or its square root

  std::string to_json() const;
};

/// +1 when mu <= tau - margin and psi > fg_min; -1 when mu >= tau + margin
/// and psi < bg_max; 0 otherwise, including when both branches hold.
int channel_polarity(double mean, double tau, double margin, double psi,
                     const DecoderConfig& config = {});

/// Fraction of pixels strictly above the channel's own Otsu threshold.
double foreground_ratio(const Image& feat, int channel);

/// Applies the polarity rule to precomputed channel statistics.
DecoderWeights adapt_from_statistics(std::vector<double> means, std::vector<double> psi,
                                     const DecoderConfig& config = {});

/// Per-image decoder weights; needs at least two channels.
DecoderWeights adapt_weights(const Image& feat, const DecoderConfig& config = {});

/// s = relu(sum_b alpha_b feat_b), min-max normalized to [0, 1]. An all-zero
/// map stays zero.
Image decode(const Image& feat, const DecoderWeights& weights);

struct SaliencyResult {
  Image map;  // input resolution, one channel, values in [0, 1]
  DecoderWeights weights;
};

/// Encodes through `layer_index`, rescales the activations to [0, 1]
/// (per channel by default, so a channel's mean reflects its coverage), adapts
/// the decoder, decodes and resamples to the input size. Defaults to the
/// last layer.
SaliencyResult saliency(const Model& model, const Image& img,
                        std::optional<std::size_t> layer_index = std::nullopt,
                        const DecoderConfig& config = {});

}  // namespace flim
