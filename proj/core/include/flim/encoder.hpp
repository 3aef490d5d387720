#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flim/image.hpp"
#include "flim/kernel.hpp"
#include "flim/markers.hpp"
#include "flim/separable.hpp"

namespace flim {

enum class ConvMode { regular, separable };

struct LayerSpec {
  int kernel_size = 3;
  std::vector<int> dilations{1};
  int n_kernels = 8;
  int per_marker = 5;  // kernels kept per marker before the final clustering
  PoolKind pool_kind = PoolKind::max;
  int pool_size = 1;
  int pool_stride = 1;
  ConvMode mode = ConvMode::regular;

  void validate() const;
  bool operator==(const LayerSpec&) const = default;
};

struct ArchitectureSpec {
  int input_channels = 1;
  std::vector<LayerSpec> layers;

  void validate() const;
  bool operator==(const ArchitectureSpec&) const = default;
};

ArchitectureSpec parse_architecture(std::string_view json);
std::string architecture_to_json(const ArchitectureSpec& arch);

/// Single layer entry in the architecture JSON format.
LayerSpec parse_layer_spec(std::string_view json);
std::string layer_spec_to_json(const LayerSpec& spec);

namespace presets {
/// Four-layer network used for parasite-egg images (400 x 400 x 3).
ArchitectureSpec schistosoma(ConvMode mode = ConvMode::regular, bool multi_dilation = false);
/// Three-layer network used for FLAIR brain slices (240 x 240 x 1).
ArchitectureSpec brain_tumor(ConvMode mode = ConvMode::regular, bool multi_dilation = false);
}  // namespace presets

struct TrainedLayer {
  LayerSpec spec;
  int in_channels = 0;
  NormalizationStats norm;
  KernelBank bank;                          // regular kernels, also kept for separable layers
  std::optional<SeparableLayer> separable;  // present iff spec.mode == separable

  int out_channels() const noexcept;
  void validate() const;
  bool operator==(const TrainedLayer&) const = default;
};

struct Model {
  ArchitectureSpec arch;
  std::vector<TrainedLayer> layers;
  std::uint64_t seed = 0;
  std::vector<std::string> provenance;  // training image identifiers

  void validate() const;
  bool operator==(const Model&) const = default;
};

/// Regular (multi-dilation) convolution with stride 1 and zero padding:
/// y_ij = sum over d in D of <dilated patch at (i, j), k>. Returns h x w x m.
Image convolve(const Image& img, const KernelBank& bank, std::span<const int> dilations);

/// Marker-driven kernel estimation on already normalized layer inputs.
///
/// Each marker contributes min(m_r, |patches|) k-means representatives drawn
/// from its own patches; the union is clustered again down to m kernels.
/// Every center is replaced by the nearest member of its cluster, so returned
/// kernels are actual marker patches.
KernelBank estimate_kernels(std::span<const Image> inputs, std::span<const MarkerSet> markers,
                            const LayerSpec& spec, std::uint64_t seed, int max_iter = 100);

/// normalize -> convolve -> relu -> pool
Image run_layer(const Image& img, const TrainedLayer& layer);

/// Runs layers [0, last_layer] on an image.
Image run_encoder(const Model& model, const Image& img, std::size_t last_layer);

struct LayerTrainingOptions {
  int simplify_iterations = 0;  // Algorithm-style pruning applied right after estimation
  SpreadMeasure spread = SpreadMeasure::variance;
  int max_iter = 100;
};

struct TrainOptions {
  std::uint64_t seed = 0;
  LayerTrainingOptions layer;
};

/// Deterministic per-layer seed derived from the global seed.
std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer_index);

/// Learns one layer from its inputs and the markers projected onto them.
/// Parameters are rounded to float precision so that the in-memory layer and
/// its serialized form compute identical outputs.
TrainedLayer train_layer(std::span<const Image> inputs, std::span<const MarkerSet> markers,
                         const LayerSpec& spec, std::uint64_t seed,
                         const LayerTrainingOptions& options = {});

/// Trains every layer of `arch` in order.
Model train_encoder(std::span<const Image> images, std::span<const MarkerSet> markers,
                    const ArchitectureSpec& arch, const TrainOptions& options,
                    std::vector<std::string> provenance = {});

/// Keeps layers [0, first_layer) and retrains the rest of model.arch on top of
/// them.
void retrain_from(Model& model, std::span<const Image> images, std::span<const MarkerSet> markers,
                  std::size_t first_layer, const TrainOptions& options);

/// Trains layer model.layers.size() of model.arch on top of the trained
/// prefix, exactly as retrain_from would.
TrainedLayer train_next_layer(const Model& model, std::span<const Image> images,
                              std::span<const MarkerSet> markers, const TrainOptions& options);

/// Regular layer: a^2 f m. Separable layer: a^2 f + m f. Normalization
/// statistics are not counted.
std::uint64_t count_params(std::span<const TrainedLayer> layers);

/// Per output element: 2 a^2 f |D| per regular kernel, 2 a^2 |D| + 2 f |D|
/// per separable output; one op per ReLU element and per pooling window
/// element. With `dilations_applied` false every layer counts as |D| = 1.
std::uint64_t count_flops(std::span<const TrainedLayer> layers, int height, int width,
                          bool dilations_applied = true);

/// Same accounting driven by specs only, for architectures not yet trained.
std::uint64_t count_params(const ArchitectureSpec& arch);
std::uint64_t count_flops(const ArchitectureSpec& arch, int height, int width,
                          bool dilations_applied = true);

}  // namespace flim
