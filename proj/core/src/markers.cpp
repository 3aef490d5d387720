#include "flim/markers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "flim/error.hpp"

namespace flim {

std::size_t MarkerSet::pixel_count() const noexcept {
  std::size_t n = 0;
  for (const Marker& m : markers) n += m.pixels.size();
  return n;
}

MarkerSet markers_from_raster(const LabelRaster& raster, std::string image_id) {
  const int h = raster.height, w = raster.width;
  require(h >= 1 && w >= 1 &&
              raster.values.size() == static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
          ErrorCode::shape_mismatch, "marker raster has inconsistent dimensions");
  MarkerSet set{std::move(image_id), h, w, {}};
  std::vector<bool> seen(raster.values.size(), false);
  auto value = [&](int i, int j) { return raster.values[static_cast<std::size_t>(i) * w + j]; };

  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::uint8_t v = value(i, j);
      require(v <= 2, ErrorCode::invalid_argument,
              "marker raster value " + std::to_string(v) + " at (" + std::to_string(i) + ", " +
                  std::to_string(j) + ") is not 0, 1 or 2");
      if (v == 0 || seen[static_cast<std::size_t>(i) * w + j]) continue;

      Marker marker{static_cast<int>(set.markers.size()) + 1, static_cast<MarkerClass>(v), {}};
      std::deque<Pixel> queue{{i, j}};
      seen[static_cast<std::size_t>(i) * w + j] = true;
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        marker.pixels.push_back(p);
        constexpr int di[] = {-1, 0, 0, 1};
        constexpr int dj[] = {0, -1, 1, 0};
        for (int k = 0; k < 4; ++k) {
          const int qi = p.i + di[k], qj = p.j + dj[k];
          if (qi < 0 || qj < 0 || qi >= h || qj >= w) continue;
          const std::size_t q = static_cast<std::size_t>(qi) * w + qj;
          if (seen[q] || raster.values[q] != v) continue;
          seen[q] = true;
          queue.push_back({qi, qj});
        }
      }
      std::sort(marker.pixels.begin(), marker.pixels.end());
      set.markers.push_back(std::move(marker));
    }
  }
  return set;
}

LabelRaster markers_to_raster(const MarkerSet& markers) {
  LabelRaster raster{markers.height, markers.width, {}};
  raster.values.assign(static_cast<std::size_t>(markers.height) * markers.width, 0);
  for (const Marker& m : markers.markers) {
    for (const Pixel& p : m.pixels) {
      require(p.i >= 0 && p.j >= 0 && p.i < markers.height && p.j < markers.width,
              ErrorCode::out_of_bounds, "marker pixel outside image");
      raster.values[static_cast<std::size_t>(p.i) * markers.width + p.j] =
          static_cast<std::uint8_t>(m.cls);
    }
  }
  return raster;
}

void validate_markers(const MarkerSet& markers) {
  std::set<Pixel> used;
  for (const Marker& m : markers.markers) {
    const std::string who = "marker " + std::to_string(m.id);
    require(!m.pixels.empty(), ErrorCode::invalid_argument, who + " is empty");
    require(m.cls == MarkerClass::object || m.cls == MarkerClass::background,
            ErrorCode::invalid_argument, who + " has an unknown class");
    std::set<Pixel> own;
    for (const Pixel& p : m.pixels) {
      require(p.i >= 0 && p.j >= 0 && p.i < markers.height && p.j < markers.width,
              ErrorCode::out_of_bounds, who + " has a pixel outside the image");
      require(own.insert(p).second, ErrorCode::invalid_argument, who + " repeats a pixel");
      require(used.insert(p).second, ErrorCode::invalid_argument,
              who + " overlaps another marker");
    }
    // 4-connectivity: flood from the first pixel within the marker's own set
    std::set<Pixel> reached{m.pixels.front()};
    std::deque<Pixel> queue{m.pixels.front()};
    while (!queue.empty()) {
      const Pixel p = queue.front();
      queue.pop_front();
      for (const Pixel q : {Pixel{p.i - 1, p.j}, Pixel{p.i + 1, p.j}, Pixel{p.i, p.j - 1},
                            Pixel{p.i, p.j + 1}}) {
        if (own.contains(q) && reached.insert(q).second) queue.push_back(q);
      }
    }
    require(reached.size() == own.size(), ErrorCode::invalid_argument,
            who + " is not 4-connected");
  }
}

MarkerSet project_markers(const MarkerSet& markers, int total_stride) {
  require(total_stride >= 1, ErrorCode::invalid_argument, "stride must be >= 1");
  if (total_stride == 1) return markers;
  MarkerSet out{markers.image_id, (markers.height + total_stride - 1) / total_stride,
                (markers.width + total_stride - 1) / total_stride, {}};
  for (const Marker& m : markers.markers) {
    Marker projected{m.id, m.cls, {}};
    projected.pixels.reserve(m.pixels.size());
    for (const Pixel& p : m.pixels) {
      projected.pixels.push_back({p.i / total_stride, p.j / total_stride});
    }
    std::sort(projected.pixels.begin(), projected.pixels.end());
    projected.pixels.erase(std::unique(projected.pixels.begin(), projected.pixels.end()),
                           projected.pixels.end());
    if (!projected.pixels.empty()) out.markers.push_back(std::move(projected));
  }
  return out;
}

NormalizationStats marker_normalization_stats(std::span<const Image> images,
                                              std::span<const MarkerSet> markers,
                                              double epsilon) {
  require(images.size() == markers.size(), ErrorCode::shape_mismatch,
          "images and marker sets must be aligned");
  require(!images.empty(), ErrorCode::no_marker_pixels, "no marker pixels");
  const int f = images.front().channels();
  std::vector<double> sum(static_cast<std::size_t>(f), 0.0);
  std::vector<double> sq(static_cast<std::size_t>(f), 0.0);
  std::size_t n = 0;

  // First pass: means. Pixels shared by several markers count once.
  std::vector<std::vector<Pixel>> unions(images.size());
  for (std::size_t k = 0; k < images.size(); ++k) {
    require(images[k].channels() == f, ErrorCode::shape_mismatch,
            "all training images must share the channel count");
    auto& u = unions[k];
    for (const Marker& m : markers[k].markers) u.insert(u.end(), m.pixels.begin(), m.pixels.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    for (const Pixel& p : u) {
      require(images[k].in_bounds(p.i, p.j), ErrorCode::out_of_bounds,
              "marker pixel outside image " + markers[k].image_id);
      auto px = images[k].pixel(p.i, p.j);
      for (int b = 0; b < f; ++b) sum[b] += px[b];
    }
    n += u.size();
  }
  require(n > 0, ErrorCode::no_marker_pixels, "no marker pixels");

  NormalizationStats stats;
  stats.epsilon = epsilon;
  stats.mean.resize(static_cast<std::size_t>(f));
  for (int b = 0; b < f; ++b) stats.mean[b] = sum[b] / static_cast<double>(n);
  for (std::size_t k = 0; k < images.size(); ++k) {
    for (const Pixel& p : unions[k]) {
      auto px = images[k].pixel(p.i, p.j);
      for (int b = 0; b < f; ++b) {
        const double d = px[b] - stats.mean[b];
        sq[b] += d * d;
      }
    }
  }
  stats.stdev.resize(static_cast<std::size_t>(f));
  for (int b = 0; b < f; ++b) stats.stdev[b] = std::sqrt(sq[b] / static_cast<double>(n));
  return stats;
}

}  // namespace flim
