#include "flim/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <spdlog/spdlog.h>

#include "flim/error.hpp"
#include "flim/numerics.hpp"
#include "flim/simplify.hpp"

namespace flim {

void LayerSpec::validate() const {
  require(kernel_size >= 1 && kernel_size % 2 == 1, ErrorCode::invalid_argument,
          "kernel_size must be a positive odd integer");
  require(!dilations.empty(), ErrorCode::invalid_argument, "dilations must not be empty");
  for (std::size_t k = 0; k < dilations.size(); ++k) {
    require(dilations[k] >= 1, ErrorCode::invalid_argument, "dilations must be >= 1");
    require(k == 0 || dilations[k] > dilations[k - 1], ErrorCode::invalid_argument,
            "dilations must be strictly increasing");
  }
  require(n_kernels >= 1, ErrorCode::invalid_argument, "n_kernels must be >= 1");
  require(per_marker >= 1, ErrorCode::invalid_argument, "per_marker must be >= 1");
  require(pool_size >= 1 && pool_size % 2 == 1, ErrorCode::invalid_argument,
          "pool_size must be a positive odd integer");
  require(pool_stride >= 1, ErrorCode::invalid_argument, "pool_stride must be >= 1");
}

void ArchitectureSpec::validate() const {
  require(input_channels >= 1, ErrorCode::invalid_argument, "input_channels must be >= 1");
  require(!layers.empty(), ErrorCode::invalid_argument, "architecture needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    try {
      layers[l].validate();
    } catch (const Error& e) {
      fail(e.code(), "layer " + std::to_string(l + 1) + ": " + e.what());
    }
  }
}

int TrainedLayer::out_channels() const noexcept {
  return separable ? static_cast<int>(separable->n_kernels()) : static_cast<int>(bank.count());
}

void TrainedLayer::validate() const {
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorCode::invariant_violation, e.what());
  }
  require(in_channels >= 1, ErrorCode::invariant_violation, "layer input channels must be >= 1");
  require(norm.mean.size() == static_cast<std::size_t>(in_channels) &&
              norm.stdev.size() == norm.mean.size(),
          ErrorCode::invariant_violation, "normalization stats do not match input channels");
  require(std::all_of(norm.stdev.begin(), norm.stdev.end(),
                      [](double s) { return std::isfinite(s) && s >= 0.0; }) &&
              std::all_of(norm.mean.begin(), norm.mean.end(),
                          [](double s) { return std::isfinite(s); }) &&
              std::isfinite(norm.epsilon) && norm.epsilon >= 0.0,
          ErrorCode::invariant_violation, "normalization stats must be finite");
  bank.validate();
  require(!bank.empty(), ErrorCode::invariant_violation, "layer has no kernels");
  require(bank.channels() == in_channels, ErrorCode::invariant_violation,
          "kernel channels do not match layer input channels");
  require(bank.size() == spec.kernel_size, ErrorCode::invariant_violation,
          "kernel size does not match layer spec");
  require((spec.mode == ConvMode::separable) == separable.has_value(),
          ErrorCode::invariant_violation, "separable weights must match the layer mode");
  if (separable) {
    separable->validate();
    require(separable->channels() == in_channels && separable->depthwise.size == spec.kernel_size,
            ErrorCode::invariant_violation, "separable weights do not match the layer shape");
    require(separable->n_kernels() == bank.count(), ErrorCode::invariant_violation,
            "separable kernel count does not match the regular bank");
  }
}

void Model::validate() const {
  try {
    arch.validate();
  } catch (const Error& e) {
    fail(ErrorCode::invariant_violation, e.what());
  }
  require(layers.size() == arch.layers.size(), ErrorCode::invariant_violation,
          "model has " + std::to_string(layers.size()) + " layers but architecture lists " +
              std::to_string(arch.layers.size()));
  int channels = arch.input_channels;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string who = "layer " + std::to_string(l + 1) + ": ";
    try {
      layers[l].validate();
    } catch (const Error& e) {
      fail(ErrorCode::invariant_violation, who + e.what());
    }
    const LayerSpec& a = arch.layers[l];
    const LayerSpec& s = layers[l].spec;
    // n_kernels is a request; clipping and simplification may lower the actual count.
    require(a.kernel_size == s.kernel_size && a.dilations == s.dilations && a.mode == s.mode &&
                a.pool_kind == s.pool_kind && a.pool_size == s.pool_size &&
                a.pool_stride == s.pool_stride,
            ErrorCode::invariant_violation, who + "layer spec disagrees with the architecture");
    require(layers[l].in_channels == channels, ErrorCode::invariant_violation,
            who + "expects " + std::to_string(layers[l].in_channels) + " input channels, previous "
                  "stage produces " + std::to_string(channels));
    channels = layers[l].out_channels();
  }
}

Image convolve(const Image& img, const KernelBank& bank, std::span<const int> dilations) {
  require(img.channels() == bank.channels(), ErrorCode::shape_mismatch,
          "kernel bank has " + std::to_string(bank.channels()) + " channels, image has " +
              std::to_string(img.channels()));
  require(!dilations.empty(), ErrorCode::invalid_argument, "at least one dilation required");
  require(!bank.empty(), ErrorCode::invalid_argument, "convolution with an empty kernel bank");
  const int h = img.height(), w = img.width();
  const std::size_t m = bank.count();
  const std::size_t len = bank.kernel_length();
  Image out(h, w, static_cast<int>(m));
  std::vector<double> patch(len);
  std::vector<double> partial(m);

  // Each dilation is accumulated separately and then added, so the result is
  // the exact sum of the single-dilation convolutions.
  for (int d : dilations) {
    const Adjacency adj(bank.size(), d);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        gather_patch(img, i, j, adj, patch);
        for (std::size_t c = 0; c < m; ++c) {
          auto k = bank.kernel(c);
          double s = 0.0;
          for (std::size_t t = 0; t < len; ++t) s += patch[t] * k[t];
          partial[c] = s;
        }
        auto o = out.pixel(i, j);
        for (std::size_t c = 0; c < m; ++c) o[c] += partial[c];
      }
    }
  }
  return out;
}

namespace {

// Index of the cluster member closest to its center (lowest index on ties).
std::size_t closest_member(const PointSet& points, const KMeansResult& km, std::size_t cluster) {
  std::size_t best = points.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (static_cast<std::size_t>(km.assignment[p]) != cluster) continue;
    const double d = squared_distance(points[p], km.centers[cluster]);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  if (best == points.size()) {
    // Lloyd never leaves a cluster empty after re-seeding; fall back to the
    // globally nearest point all the same.
    for (std::size_t p = 0; p < points.size(); ++p) {
      const double d = squared_distance(points[p], km.centers[cluster]);
      if (d < best_d) {
        best_d = d;
        best = p;
      }
    }
  }
  return best;
}

float to_float(double v) { return static_cast<float>(v); }

void quantize(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(to_float(v));
}

void quantize(NormalizationStats& stats) {
  quantize(stats.mean);
  quantize(stats.stdev);
  stats.epsilon = static_cast<double>(to_float(stats.epsilon));
}

}  // namespace

KernelBank estimate_kernels(std::span<const Image> inputs, std::span<const MarkerSet> markers,
                            const LayerSpec& spec, std::uint64_t seed, int max_iter) {
  spec.validate();
  require(inputs.size() == markers.size(), ErrorCode::shape_mismatch,
          "images and marker sets must be aligned");
  require(!inputs.empty(), ErrorCode::no_marker_pixels, "no marker pixels");
  const int f = inputs.front().channels();
  const Adjacency adj(spec.kernel_size, 1);
  const int dim = spec.kernel_size * spec.kernel_size * f;
  std::mt19937_64 stream(seed);

  PointSet candidates(dim);  // K_U
  std::vector<double> patch(static_cast<std::size_t>(dim));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Image& img = inputs[k];
    require(img.channels() == f, ErrorCode::shape_mismatch,
            "all layer inputs must share the channel count");
    for (const Marker& marker : markers[k].markers) {
      if (marker.pixels.empty()) continue;
      PointSet patches(dim);
      for (const Pixel& p : marker.pixels) {
        require(img.in_bounds(p.i, p.j), ErrorCode::out_of_bounds,
                "marker pixel outside image " + markers[k].image_id);
        gather_patch(img, p.i, p.j, adj, patch);
        patches.push_back(patch);
      }
      const int kr = static_cast<int>(std::min<std::size_t>(spec.per_marker, patches.size()));
      const KMeansResult km = kmeans(patches, kr, stream(), max_iter);
      for (std::size_t c = 0; c < km.centers.size(); ++c) {
        candidates.push_back(patches[closest_member(patches, km, c)]);
      }
    }
  }
  require(!candidates.empty(), ErrorCode::no_marker_pixels, "no marker pixels");

  if (static_cast<std::size_t>(spec.n_kernels) > candidates.size()) {
    spdlog::warn("requested {} kernels but markers yield only {} candidates; bank clipped",
                 spec.n_kernels, candidates.size());
  }
  const int m = static_cast<int>(std::min<std::size_t>(spec.n_kernels, candidates.size()));
  const KMeansResult km = kmeans(candidates, m, stream(), max_iter);
  KernelBank bank(spec.kernel_size, f);
  for (std::size_t c = 0; c < km.centers.size(); ++c) {
    bank.push_back(candidates[closest_member(candidates, km, c)]);
  }
  return bank;
}

Image run_layer(const Image& img, const TrainedLayer& layer) {
  require(img.channels() == layer.in_channels, ErrorCode::shape_mismatch,
          "layer expects " + std::to_string(layer.in_channels) + " channels, got " +
              std::to_string(img.channels()));
  const Image normalized = normalize(img, layer.norm);
  Image conv = layer.separable
                   ? convolve_separable(normalized, *layer.separable, layer.spec.dilations)
                   : convolve(normalized, layer.bank, layer.spec.dilations);
  return pool(relu(conv), layer.spec.pool_kind, layer.spec.pool_size, layer.spec.pool_stride);
}

Image run_encoder(const Model& model, const Image& img, std::size_t last_layer) {
  require(last_layer < model.layers.size(), ErrorCode::out_of_bounds,
          "layer " + std::to_string(last_layer + 1) + " does not exist");
  Image x = img;
  for (std::size_t l = 0; l <= last_layer; ++l) x = run_layer(x, model.layers[l]);
  return x;
}

std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer_index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(layer_index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrainedLayer train_layer(std::span<const Image> inputs, std::span<const MarkerSet> markers,
                         const LayerSpec& spec, std::uint64_t seed,
                         const LayerTrainingOptions& options) {
  spec.validate();
  require(options.simplify_iterations >= 0, ErrorCode::invalid_argument,
          "simplification iterations must be >= 0");
  TrainedLayer layer;
  layer.spec = spec;
  layer.in_channels = inputs.empty() ? 0 : inputs.front().channels();
  layer.norm = marker_normalization_stats(inputs, markers);
  quantize(layer.norm);

  std::vector<Image> normalized;
  normalized.reserve(inputs.size());
  for (const Image& img : inputs) normalized.push_back(normalize(img, layer.norm));

  layer.bank = estimate_kernels(normalized, markers, spec, seed, options.max_iter);
  quantize(layer.bank.values());
  if (options.simplify_iterations > 0 && layer.bank.count() > 1) {
    layer.bank = simplify_layer(layer.bank, options.simplify_iterations).bank;
    quantize(layer.bank.values());
  }
  if (spec.mode == ConvMode::separable) {
    SeparableLayer sep = factorize(layer.bank, options.spread);
    quantize(sep.depthwise.values);
    quantize(sep.pointwise);
    layer.separable = std::move(sep);
  }
  return layer;
}

namespace {

void check_training_set(const Model& model, std::span<const Image> images,
                        std::span<const MarkerSet> markers) {
  model.arch.validate();
  require(images.size() == markers.size(), ErrorCode::shape_mismatch,
          "images and marker sets must be aligned");
  for (const Image& img : images) {
    require(img.channels() == model.arch.input_channels, ErrorCode::shape_mismatch,
            "image channels do not match the architecture input channels");
  }
}

TrainedLayer train_at(const Model& model, std::span<const Image> current,
                      std::span<const MarkerSet> projected, std::size_t l,
                      const TrainOptions& options) {
  try {
    TrainedLayer layer =
        train_layer(current, projected, model.arch.layers[l], layer_seed(options.seed, l), options.layer);
    spdlog::debug("layer {}: {} kernels", l + 1, layer.out_channels());
    return layer;
  } catch (const Error& e) {
    fail(e.code(), "layer " + std::to_string(l + 1) + ": " + e.what());
  }
}

}  // namespace

void retrain_from(Model& model, std::span<const Image> images, std::span<const MarkerSet> markers,
                  std::size_t first_layer, const TrainOptions& options) {
  check_training_set(model, images, markers);
  require(first_layer <= model.layers.size() && first_layer <= model.arch.layers.size(),
          ErrorCode::out_of_bounds, "retraining start beyond trained layers");
  model.layers.resize(first_layer);

  std::vector<Image> current(images.begin(), images.end());
  std::vector<MarkerSet> projected(markers.begin(), markers.end());
  for (std::size_t l = 0; l < model.arch.layers.size(); ++l) {
    if (l >= first_layer) model.layers.push_back(train_at(model, current, projected, l, options));
    if (l + 1 == model.arch.layers.size()) break;
    for (Image& img : current) img = run_layer(img, model.layers[l]);
    for (MarkerSet& ms : projected) ms = project_markers(ms, model.arch.layers[l].pool_stride);
  }
}

TrainedLayer train_next_layer(const Model& model, std::span<const Image> images,
                              std::span<const MarkerSet> markers, const TrainOptions& options) {
  check_training_set(model, images, markers);
  const std::size_t next = model.layers.size();
  require(next < model.arch.layers.size(), ErrorCode::out_of_bounds, "every layer is already trained");
  std::vector<Image> current(images.begin(), images.end());
  std::vector<MarkerSet> projected(markers.begin(), markers.end());
  for (std::size_t l = 0; l < next; ++l) {
    for (Image& img : current) img = run_layer(img, model.layers[l]);
    for (MarkerSet& ms : projected) ms = project_markers(ms, model.arch.layers[l].pool_stride);
  }
  return train_at(model, current, projected, next, options);
}

Model train_encoder(std::span<const Image> images, std::span<const MarkerSet> markers,
                    const ArchitectureSpec& arch, const TrainOptions& options,
                    std::vector<std::string> provenance) {
  Model model;
  model.arch = arch;
  model.seed = options.seed;
  model.provenance = std::move(provenance);
  retrain_from(model, images, markers, 0, options);
  return model;
}

namespace {

struct LayerShape {
  const LayerSpec* spec;
  std::uint64_t in_channels;
  std::uint64_t kernels;
  bool separable;
};

std::uint64_t layer_params(const LayerShape& s) {
  const std::uint64_t a2 = static_cast<std::uint64_t>(s.spec->kernel_size) * s.spec->kernel_size;
  return s.separable ? a2 * s.in_channels + s.kernels * s.in_channels
                     : a2 * s.in_channels * s.kernels;
}

std::uint64_t flops(std::span<const LayerShape> shapes, int height, int width,
                    bool dilations_applied) {
  std::uint64_t total = 0;
  std::uint64_t h = static_cast<std::uint64_t>(height), w = static_cast<std::uint64_t>(width);
  for (const LayerShape& s : shapes) {
    const LayerSpec& spec = *s.spec;
    const std::uint64_t a2 = static_cast<std::uint64_t>(spec.kernel_size) * spec.kernel_size;
    const std::uint64_t nd = dilations_applied ? spec.dilations.size() : 1;
    const std::uint64_t outputs = h * w * s.kernels;
    const std::uint64_t per_output =
        s.separable ? 2 * a2 * nd + 2 * s.in_channels * nd : 2 * a2 * s.in_channels * nd;
    total += outputs * per_output;
    total += outputs;  // relu
    const std::uint64_t stride = static_cast<std::uint64_t>(spec.pool_stride);
    h = (h + stride - 1) / stride;
    w = (w + stride - 1) / stride;
    total += h * w * s.kernels * static_cast<std::uint64_t>(spec.pool_size) * spec.pool_size;
  }
  return total;
}

std::vector<LayerShape> shapes_of(std::span<const TrainedLayer> layers) {
  std::vector<LayerShape> shapes;
  for (const TrainedLayer& l : layers) {
    shapes.push_back({&l.spec, static_cast<std::uint64_t>(l.in_channels),
                      static_cast<std::uint64_t>(l.out_channels()), l.separable.has_value()});
  }
  return shapes;
}

std::vector<LayerShape> shapes_of(const ArchitectureSpec& arch) {
  std::vector<LayerShape> shapes;
  std::uint64_t channels = static_cast<std::uint64_t>(arch.input_channels);
  for (const LayerSpec& l : arch.layers) {
    shapes.push_back({&l, channels, static_cast<std::uint64_t>(l.n_kernels),
                      l.mode == ConvMode::separable});
    channels = static_cast<std::uint64_t>(l.n_kernels);
  }
  return shapes;
}

}  // namespace

std::uint64_t count_params(std::span<const TrainedLayer> layers) {
  std::uint64_t total = 0;
  for (const LayerShape& s : shapes_of(layers)) total += layer_params(s);
  return total;
}

std::uint64_t count_flops(std::span<const TrainedLayer> layers, int height, int width,
                          bool dilations_applied) {
  return flops(shapes_of(layers), height, width, dilations_applied);
}

std::uint64_t count_params(const ArchitectureSpec& arch) {
  std::uint64_t total = 0;
  for (const LayerShape& s : shapes_of(arch)) total += layer_params(s);
  return total;
}

std::uint64_t count_flops(const ArchitectureSpec& arch, int height, int width,
                          bool dilations_applied) {
  return flops(shapes_of(arch), height, width, dilations_applied);
}

}  // namespace flim
