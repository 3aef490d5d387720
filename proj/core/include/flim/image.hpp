#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <vector>

namespace flim {

struct Pixel {
  int i = 0;  // row
  int j = 0;  // column

  auto operator<=>(const Pixel&) const = default;
};

/// Dense h x w x f raster stored row-major in (i, j, b) order.
///
/// This is the single tensor type of the engine: network inputs, layer
/// activations, saliency maps and binary masks are all Images.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool in_bounds(int i, int j) const noexcept {
    return i >= 0 && j >= 0 && i < height_ && j < width_;
  }

  std::size_t index(int i, int j, int b = 0) const noexcept {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(b);
  }

  double& at(int i, int j, int b = 0) noexcept { return data_[index(i, j, b)]; }
  double at(int i, int j, int b = 0) const noexcept { return data_[index(i, j, b)]; }

  std::span<const double> pixel(int i, int j) const noexcept {
    return {data_.data() + index(i, j), static_cast<std::size_t>(channels_)};
  }
  std::span<double> pixel(int i, int j) noexcept {
    return {data_.data() + index(i, j), static_cast<std::size_t>(channels_)};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  /// Copy of channel b as a single-channel image.
  Image channel(int b) const;

  /// True when every value is finite.
  bool all_finite() const noexcept;

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

struct Offset {
  int di = 0;
  int dj = 0;

  bool operator==(const Offset&) const = default;
};

/// Square a x a neighbourhood scaled by a dilation factor. Displacements are
/// enumerated row-major over {-a/2..a/2}^2, so patch values and kernel
/// coefficients share one fixed order.
class Adjacency {
 public:
  Adjacency(int size, int dilation = 1);

  int size() const noexcept { return size_; }
  int dilation() const noexcept { return dilation_; }
  int radius() const noexcept { return size_ / 2; }
  std::span<const Offset> displacements() const noexcept { return displacements_; }

 private:
  int size_;
  int dilation_;
  std::vector<Offset> displacements_;
};

struct Patch {
  int size = 0;
  int channels = 0;
  Pixel center;
  std::vector<double> values;  // (displacement, channel) order
};

/// Zero-padded patch around `center`. Throws out_of_bounds when the center is
/// outside the image.
Patch extract_patch(const Image& img, Pixel center, const Adjacency& adj);

/// Same as extract_patch but writes into a caller buffer of a*a*f values.
void gather_patch(const Image& img, int i, int j, const Adjacency& adj,
                  std::span<double> out) noexcept;

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stdev;
  double epsilon = 1e-6;

  std::size_t channels() const noexcept { return mean.size(); }
  bool operator==(const NormalizationStats&) const = default;
};

/// out = (x - mean_b) / (stdev_b + epsilon), per channel.
Image normalize(const Image& img, const NormalizationStats& stats);

Image relu(const Image& img);

enum class PoolKind { max, avg };

/// Centered size x size window (zero padded) at every stride-th pixel.
/// Output is ceil(h/stride) x ceil(w/stride) x f. Average pooling divides by
/// the full window area, padding included.
Image pool(const Image& img, PoolKind kind, int size, int stride);

/// Channelwise bilinear resampling with half-pixel centers (no corner
/// alignment).
Image upsample_bilinear(const Image& img, int height, int width);

/// Rescales all values to [0, 1] by the global minimum and maximum. A
/// constant image maps to zeros.
Image rescale_unit(const Image& img);

/// rescale_unit applied to every channel independently.
Image rescale_channels(const Image& img);

}  // namespace flim
