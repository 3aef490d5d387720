#include "flim/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <tuple>

#include "flim/error.hpp"

namespace flim {

Image binarize(const Image& map, double threshold) {
  Image out(map.height(), map.width(), 1);
  for (int i = 0; i < map.height(); ++i) {
    for (int j = 0; j < map.width(); ++j) out.at(i, j) = map.at(i, j, 0) >= threshold ? 1.0 : 0.0;
  }
  return out;
}

ComponentMap connected_components(const Image& map, double threshold) {
  const int h = map.height(), w = map.width();
  ComponentMap cm{h, w, std::vector<int>(map.pixel_count(), 0), 0, {}};
  std::deque<Pixel> queue;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (map.at(i, j, 0) < threshold || cm.label(i, j) != 0) continue;
      const int label = ++cm.count;
      std::size_t area = 0;
      cm.labels[static_cast<std::size_t>(i) * w + j] = label;
      queue.push_back({i, j});
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        ++area;
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            const int qi = p.i + di, qj = p.j + dj;
            if ((di == 0 && dj == 0) || !map.in_bounds(qi, qj)) continue;
            auto& q = cm.labels[static_cast<std::size_t>(qi) * w + qj];
            if (q != 0 || map.at(qi, qj, 0) < threshold) continue;
            q = label;
            queue.push_back({qi, qj});
          }
        }
      }
      cm.areas.push_back(area);
    }
  }
  return cm;
}

Image size_filter(const Image& saliency, std::size_t min_area, std::size_t max_area) {
  require(min_area <= max_area, ErrorCode::invalid_argument, "min_area must not exceed max_area");
  const ComponentMap cm = connected_components(saliency);
  Image out = saliency;
  for (int i = 0; i < saliency.height(); ++i) {
    for (int j = 0; j < saliency.width(); ++j) {
      const int l = cm.label(i, j);
      if (l == 0) continue;
      const std::size_t area = cm.areas[static_cast<std::size_t>(l) - 1];
      if (area < min_area || area > max_area) {
        for (double& v : out.pixel(i, j)) v = 0.0;
      }
    }
  }
  return out;
}

namespace {

constexpr double kFar = 1e30;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), in place.
void distance_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

std::vector<double> squared_edt(const std::vector<bool>& fg, int h, int w) {
  std::vector<double> grid(fg.size());
  for (std::size_t p = 0; p < fg.size(); ++p) grid[p] = fg[p] ? 0.0 : kFar;
  const int n = std::max(h, w);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);

  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int j = 0; j < w; ++j) {
    for (int i = 0; i < h; ++i) f[i] = grid[static_cast<std::size_t>(i) * w + j];
    distance_1d(f, d, v, z);
    for (int i = 0; i < h; ++i) grid[static_cast<std::size_t>(i) * w + j] = d[i];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) f[j] = grid[static_cast<std::size_t>(i) * w + j];
    distance_1d(f, d, v, z);
    for (int j = 0; j < w; ++j) grid[static_cast<std::size_t>(i) * w + j] = d[j];
  }
  for (double& g : grid) {
    if (g >= kFar / 2) g = std::numeric_limits<double>::infinity();
  }
  return grid;
}

}  // namespace

std::vector<double> squared_distance_transform(const Image& mask) {
  std::vector<bool> fg(mask.pixel_count());
  for (std::size_t p = 0; p < fg.size(); ++p) {
    fg[p] = mask.data()[p * static_cast<std::size_t>(mask.channels())] >= kBinaryThreshold;
  }
  return squared_edt(fg, mask.height(), mask.width());
}

SeedSets estimate_seeds(const Image& saliency, double erosion_radius, double dilation_radius) {
  require(erosion_radius >= 0.0 && dilation_radius >= 0.0, ErrorCode::invalid_argument,
          "seed radii must be non-negative");
  const int h = saliency.height(), w = saliency.width();
  const Image bin = binarize(saliency);

  // Background one pixel beyond the border so erosion eats the image edge.
  const int ph = h + 2, pw = w + 2;
  std::vector<bool> background(static_cast<std::size_t>(ph) * pw, true);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      background[static_cast<std::size_t>(i + 1) * pw + j + 1] = bin.at(i, j) < 0.5;
    }
  }
  const std::vector<double> to_background = squared_edt(background, ph, pw);
  const std::vector<double> to_object = squared_distance_transform(bin);

  SeedSets seeds;
  const double r_in = erosion_radius * erosion_radius;
  const double r_out = dilation_radius * dilation_radius;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (bin.at(i, j) >= 0.5 && to_background[static_cast<std::size_t>(i + 1) * pw + j + 1] > r_in) {
        seeds.object.push_back({i, j});
      }
      if (to_object[static_cast<std::size_t>(i) * w + j] > r_out) seeds.background.push_back({i, j});
    }
  }
  return seeds;
}

Image seeded_delineation(const Image& img, const SeedSets& seeds) {
  if (seeds.object.empty() || seeds.background.empty()) return binarize(img);
  const int h = img.height(), w = img.width();
  const std::size_t n = img.pixel_count();
  constexpr int kBackground = 0, kObject = 1;

  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<int> label(n, kBackground);
  std::vector<bool> done(n, false), is_seed(n, false);
  using Entry = std::tuple<double, int, std::size_t>;  // (cost, label, raster index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  auto seed = [&](const Pixel& p, int cls) {
    require(img.in_bounds(p.i, p.j), ErrorCode::out_of_bounds, "seed outside image");
    const std::size_t idx = static_cast<std::size_t>(p.i) * w + p.j;
    if (is_seed[idx] && label[idx] <= cls) return;
    is_seed[idx] = true;
    cost[idx] = 0.0;
    label[idx] = cls;
    heap.emplace(0.0, cls, idx);
  };
  for (const Pixel& p : seeds.background) seed(p, kBackground);
  for (const Pixel& p : seeds.object) seed(p, kObject);

  while (!heap.empty()) {
    const auto [c, l, idx] = heap.top();
    heap.pop();
    if (done[idx] || c != cost[idx] || l != label[idx]) continue;
    done[idx] = true;
    const int i = static_cast<int>(idx / static_cast<std::size_t>(w));
    const int j = static_cast<int>(idx % static_cast<std::size_t>(w));
    auto fp = img.pixel(i, j);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const int qi = i + di, qj = j + dj;
        if ((di == 0 && dj == 0) || qi < 0 || qj < 0 || qi >= h || qj >= w) continue;
        const std::size_t q = static_cast<std::size_t>(qi) * w + qj;
        if (done[q] || is_seed[q]) continue;  // zero-weight arcs must not relabel seeds
        auto fq = img.pixel(qi, qj);
        double d2 = 0.0;
        for (std::size_t b = 0; b < fp.size(); ++b) d2 += (fp[b] - fq[b]) * (fp[b] - fq[b]);
        const double nc = c + std::sqrt(d2);
        if (nc < cost[q] || (nc == cost[q] && l < label[q])) {
          cost[q] = nc;
          label[q] = l;
          heap.emplace(nc, l, q);
        }
      }
    }
  }

  Image out(h, w, 1);
  for (std::size_t p = 0; p < n; ++p) out.data()[p] = label[p] == kObject ? 1.0 : 0.0;
  return out;
}

Image postprocess(const Image& image, const Image& saliency, const PostprocessOptions& options) {
  Image out = options.size_filter ? size_filter(saliency, options.min_area, options.max_area)
                                  : saliency;
  if (!options.delineate) return out;
  const SeedSets seeds = estimate_seeds(out, options.erosion_radius, options.dilation_radius);
  if (seeds.object.empty() || seeds.background.empty()) return binarize(out);
  return seeded_delineation(image, seeds);
}

}  // namespace flim
