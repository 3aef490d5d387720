#include "flim/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flim/error.hpp"

namespace flim {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  require(height >= 1 && width >= 1 && channels >= 1, ErrorCode::invalid_argument,
          "image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require(height >= 1 && width >= 1 && channels >= 1, ErrorCode::invalid_argument,
          "image dimensions must be positive");
  require(data_.size() == static_cast<std::size_t>(height) * width * channels,
          ErrorCode::shape_mismatch, "image data length does not match h*w*f");
}

Image Image::channel(int b) const {
  require(b >= 0 && b < channels_, ErrorCode::out_of_bounds, "channel index out of range");
  Image out(height_, width_, 1);
  for (std::size_t p = 0; p < pixel_count(); ++p) {
    out.data_[p] = data_[p * channels_ + b];
  }
  return out;
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Adjacency::Adjacency(int size, int dilation) : size_(size), dilation_(dilation) {
  require(size >= 1 && size % 2 == 1, ErrorCode::invalid_argument,
          "adjacency size must be a positive odd integer");
  require(dilation >= 1, ErrorCode::invalid_argument, "dilation must be >= 1");
  const int r = size / 2;
  displacements_.reserve(static_cast<std::size_t>(size) * size);
  for (int x = -r; x <= r; ++x) {
    for (int y = -r; y <= r; ++y) {
      displacements_.push_back({x * dilation, y * dilation});
    }
  }
}

void gather_patch(const Image& img, int i, int j, const Adjacency& adj,
                  std::span<double> out) noexcept {
  const int f = img.channels();
  std::size_t k = 0;
  for (const Offset& o : adj.displacements()) {
    const int qi = i + o.di;
    const int qj = j + o.dj;
    if (img.in_bounds(qi, qj)) {
      auto px = img.pixel(qi, qj);
      std::copy(px.begin(), px.end(), out.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(k), f, 0.0);
    }
    k += static_cast<std::size_t>(f);
  }
}

Patch extract_patch(const Image& img, Pixel center, const Adjacency& adj) {
  require(img.in_bounds(center.i, center.j), ErrorCode::out_of_bounds,
          "patch center (" + std::to_string(center.i) + ", " + std::to_string(center.j) +
              ") outside image");
  Patch patch{adj.size(), img.channels(), center, {}};
  patch.values.resize(static_cast<std::size_t>(adj.size()) * adj.size() * img.channels());
  gather_patch(img, center.i, center.j, adj, patch.values);
  return patch;
}

Image normalize(const Image& img, const NormalizationStats& stats) {
  require(static_cast<std::size_t>(img.channels()) == stats.mean.size() &&
              stats.mean.size() == stats.stdev.size(),
          ErrorCode::shape_mismatch,
          "normalization expects " + std::to_string(stats.mean.size()) + " channels, got " +
              std::to_string(img.channels()));
  Image out = img;
  const auto f = static_cast<std::size_t>(img.channels());
  auto data = out.data();
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::size_t b = k % f;
    const double denom = stats.stdev[b] + stats.epsilon;
    data[k] = denom > 0.0 ? (data[k] - stats.mean[b]) / denom : 0.0;
  }
  return out;
}

Image relu(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

Image pool(const Image& img, PoolKind kind, int size, int stride) {
  require(size >= 1 && size % 2 == 1, ErrorCode::invalid_argument,
          "pool size must be a positive odd integer");
  require(stride >= 1, ErrorCode::invalid_argument, "pool stride must be >= 1");
  const int h = img.height(), w = img.width(), f = img.channels();
  const int oh = (h + stride - 1) / stride;
  const int ow = (w + stride - 1) / stride;
  const int r = size / 2;
  const double area = static_cast<double>(size) * size;
  Image out(oh, ow, f);
  std::vector<double> acc(static_cast<std::size_t>(f));
  for (int oi = 0; oi < oh; ++oi) {
    for (int oj = 0; oj < ow; ++oj) {
      const int ci = oi * stride, cj = oj * stride;
      const bool clipped = ci - r < 0 || cj - r < 0 || ci + r >= h || cj + r >= w;
      if (kind == PoolKind::max) {
        // zero padding participates in the max whenever the window is clipped
        std::fill(acc.begin(), acc.end(), clipped ? 0.0 : -std::numeric_limits<double>::infinity());
      } else {
        std::fill(acc.begin(), acc.end(), 0.0);
      }
      for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
          const int qi = ci + di, qj = cj + dj;
          if (!img.in_bounds(qi, qj)) continue;
          auto px = img.pixel(qi, qj);
          for (int b = 0; b < f; ++b) {
            if (kind == PoolKind::max) {
              acc[b] = std::max(acc[b], px[b]);
            } else {
              acc[b] += px[b];
            }
          }
        }
      }
      auto o = out.pixel(oi, oj);
      for (int b = 0; b < f; ++b) o[b] = kind == PoolKind::max ? acc[b] : acc[b] / area;
    }
  }
  return out;
}

Image upsample_bilinear(const Image& img, int height, int width) {
  require(height >= 1 && width >= 1, ErrorCode::invalid_argument,
          "target dimensions must be positive");
  if (height == img.height() && width == img.width()) return img;
  const int h = img.height(), w = img.width(), f = img.channels();
  const double sy = static_cast<double>(h) / height;
  const double sx = static_cast<double>(w) / width;
  Image out(height, width, f);
  for (int i = 0; i < height; ++i) {
    const double y = std::clamp((i + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, h - 1);
    const double ty = y - y0;
    for (int j = 0; j < width; ++j) {
      const double x = std::clamp((j + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, w - 1);
      const double tx = x - x0;
      for (int b = 0; b < f; ++b) {
        const double top = img.at(y0, x0, b) * (1.0 - tx) + img.at(y0, x1, b) * tx;
        const double bottom = img.at(y1, x0, b) * (1.0 - tx) + img.at(y1, x1, b) * tx;
        out.at(i, j, b) = top * (1.0 - ty) + bottom * ty;
      }
    }
  }
  return out;
}

Image rescale_unit(const Image& img) {
  Image out = img;
  auto data = out.data();
  if (data.empty()) return out;
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : data) v = range > 0.0 ? (v - min) / range : 0.0;
  return out;
}

Image rescale_channels(const Image& img) {
  Image out = img;
  for (int b = 0; b < img.channels(); ++b) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < img.height(); ++i) {
      for (int j = 0; j < img.width(); ++j) {
        lo = std::min(lo, img.at(i, j, b));
        hi = std::max(hi, img.at(i, j, b));
      }
    }
    const double range = hi - lo;
    for (int i = 0; i < img.height(); ++i) {
      for (int j = 0; j < img.width(); ++j) {
        out.at(i, j, b) = range > 0.0 ? (img.at(i, j, b) - lo) / range : 0.0;
      }
    }
  }
  return out;
}

}  // namespace flim
