#pragma once

#include <span>
#include <vector>

#include "flim/image.hpp"
#include "flim/kernel.hpp"

namespace flim {

/// One depthwise kernel (a x a x f) shared by all outputs plus m pointwise
/// channel-mixing vectors of length f.
struct SeparableLayer {
  Kernel depthwise;
  std::vector<double> pointwise;  // m x f, row per output kernel
  std::vector<int> counts;

  int channels() const noexcept { return depthwise.channels; }
  std::size_t n_kernels() const noexcept { return counts.size(); }
  std::span<const double> pointwise_kernel(std::size_t c) const noexcept {
    const auto f = static_cast<std::size_t>(depthwise.channels);
    return {pointwise.data() + c * f, f};
  }

  void validate() const;
  bool operator==(const SeparableLayer&) const = default;
};

/// How the per-channel coefficient spread is measured. The weighting formula
/// normalizes the summed squared deviations by a^2 * m, i.e. a variance; the
/// square root is available as an alternative.
enum class SpreadMeasure { variance, stdev };

struct ChannelImportance {
  std::vector<double> mean;    // mu_b over all a^2 * m coefficients of channel b
  std::vector<double> spread;  // sigma_b
  double beta = 0.0;           // sum of channel means
  std::vector<double> omega;   // mu_b * sigma_b / beta
};

/// Elementwise mean over the kernels of a bank.
Kernel mean_kernel(const KernelBank& bank);

/// Throws degenerate_input when |beta| < 1e-12.
ChannelImportance channel_importance(const KernelBank& bank,
                                     SpreadMeasure spread = SpreadMeasure::variance);

/// phi_b(k_c) = omega_b / a^2 * sum_{i,j} k_c[i, j, b], row per kernel.
std::vector<double> pointwise_weights(const KernelBank& bank, std::span<const double> omega);

SeparableLayer factorize(const KernelBank& bank, SpreadMeasure spread = SpreadMeasure::variance);

/// Per-channel convolution with one a x a x f kernel, summed over dilations.
/// Output keeps the f input channels.
Image depthwise_convolve(const Image& img, const Kernel& depthwise, std::span<const int> dilations);

/// Mixes the channels of a depthwise output into m outputs.
Image pointwise_combine(const Image& depthwise_out, const SeparableLayer& layer);

Image convolve_separable(const Image& img, const SeparableLayer& layer,
                         std::span<const int> dilations);

}  // namespace flim
