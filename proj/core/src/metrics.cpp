#include "flim/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "flim/error.hpp"
#include "flim/postprocess.hpp"

namespace flim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_shape(const Image& a, const Image& b) {
  require(a.height() == b.height() && a.width() == b.width(), ErrorCode::shape_mismatch,
          "saliency and ground truth dimensions differ");
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  require(size >= 1 && size % 2 == 1, ErrorCode::invalid_argument, "gaussian size must be odd");
  require(sigma >= 0.0, ErrorCode::invalid_argument, "gaussian sigma must be non-negative");
  const int r = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size) * size, 0.0);
  if (sigma == 0.0) {
    k[static_cast<std::size_t>(r) * size + r] = 1.0;
    return k;
  }
  double total = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(y + r) * size + (x + r)] = v;
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return k;
}

// Nearest object pixel of every pixel given exact squared distances. Among
// equidistant candidates the lowest raster index wins.
std::vector<std::size_t> nearest_object(const std::vector<bool>& fg,
                                        const std::vector<double>& d2, int h, int w) {
  std::vector<std::size_t> idx(fg.size());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * w + j;
      if (fg[p]) {
        idx[p] = p;
        continue;
      }
      const auto target = static_cast<long long>(std::llround(d2[p]));
      const auto reach = static_cast<int>(std::sqrt(static_cast<double>(target)));
      bool found = false;
      for (int di = -reach - 1; di <= reach + 1 && !found; ++di) {
        const long long rest = target - static_cast<long long>(di) * di;
        const int qi = i + di;
        if (rest < 0 || qi < 0 || qi >= h) continue;
        auto dj = static_cast<long long>(std::sqrt(static_cast<double>(rest)));
        while (dj * dj > rest) --dj;
        while ((dj + 1) * (dj + 1) <= rest) ++dj;
        if (dj * dj != rest) continue;
        for (const long long qj : {j - dj, j + dj}) {
          if (qj < 0 || qj >= w) continue;
          const std::size_t q = static_cast<std::size_t>(qi) * w + static_cast<std::size_t>(qj);
          if (fg[q]) {
            idx[p] = q;
            found = true;
            break;
          }
        }
      }
      require(found, ErrorCode::invariant_violation, "distance transform inconsistent");
    }
  }
  return idx;
}

double mean_of(const std::vector<ImageScore>& s, double ImageScore::*field) {
  if (s.empty()) return 0.0;
  double total = 0.0;
  for (const auto& x : s) total += x.*field;
  return total / static_cast<double>(s.size());
}

nlohmann::json scores_json(const std::vector<ImageScore>& scores) {
  auto arr = nlohmann::json::array();
  for (const auto& s : scores) arr.push_back({{"name", s.name}, {"fbw", s.fbw}, {"mae", s.mae}});
  return arr;
}

nlohmann::json wilcoxon_json(const WilcoxonResult& r) {
  return {{"statistic", r.statistic}, {"z", r.z},         {"p_normal", r.p_normal},
          {"p_value", r.p_value},     {"n", r.n},         {"significant", r.significant}};
}

}  // namespace

double weighted_fmeasure(const Image& saliency, const Image& gt, const WeightedFConfig& config) {
  require_same_shape(saliency, gt);
  const int h = gt.height(), w = gt.width();
  const std::size_t n = gt.pixel_count();
  std::vector<bool> fg(n);
  std::vector<double> err(n);
  std::size_t object = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double s = saliency.data()[p * static_cast<std::size_t>(saliency.channels())];
    fg[p] = gt.data()[p * static_cast<std::size_t>(gt.channels())] >= kBinaryThreshold;
    err[p] = std::abs(s - (fg[p] ? 1.0 : 0.0));
    object += fg[p] ? 1 : 0;
  }
  if (object == 0) {
    for (double e : err) {
      if (e > 0.0) return 0.0;
    }
    return 1.0;
  }

  Image mask(h, w, 1);
  for (std::size_t p = 0; p < n; ++p) mask.data()[p] = fg[p] ? 1.0 : 0.0;
  const std::vector<double> d2 = squared_distance_transform(mask);
  const std::vector<std::size_t> nearest = nearest_object(fg, d2, h, w);

  std::vector<double> et(n);
  for (std::size_t p = 0; p < n; ++p) et[p] = err[nearest[p]];

  const std::vector<double> k = gaussian_kernel(config.gaussian_size, config.gaussian_sigma);
  const int r = config.gaussian_size / 2;
  double sum_ew_fg = 0.0, sum_ew_bg = 0.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * w + j;
      if (fg[p]) {
        double ea = 0.0;
        for (int y = -r; y <= r; ++y) {
          for (int x = -r; x <= r; ++x) {
            const int qi = i + y, qj = j + x;
            if (qi < 0 || qj < 0 || qi >= h || qj >= w) continue;
            ea += k[static_cast<std::size_t>(y + r) * config.gaussian_size + (x + r)] *
                  et[static_cast<std::size_t>(qi) * w + qj];
          }
        }
        sum_ew_fg += std::min(err[p], ea);
      } else {
        const double b = config.distance_weighting
                             ? 2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt(d2[p]))
                             : 1.0;
        sum_ew_bg += err[p] * b;
      }
    }
  }
  const double tpw = static_cast<double>(object) - sum_ew_fg;
  const double fpw = sum_ew_bg;
  const double recall = 1.0 - sum_ew_fg / static_cast<double>(object);
  const double precision = tpw / (kEps + tpw + fpw);
  return (1.0 + config.beta2) * recall * precision /
         (kEps + recall + config.beta2 * precision);
}

double mae_raw(const Image& saliency, const Image& gt) {
  require_same_shape(saliency, gt);
  const std::size_t n = gt.pixel_count();
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    total += std::abs(saliency.data()[p * static_cast<std::size_t>(saliency.channels())] -
                      gt.data()[p * static_cast<std::size_t>(gt.channels())]);
  }
  return total / static_cast<double>(n);
}

double mae(const Image& saliency, const Image& gt) { return 100.0 * mae_raw(saliency, gt); }

ImageScore score_image(std::string name, const Image& saliency, const Image& gt) {
  return {std::move(name), weighted_fmeasure(saliency, gt), mae(saliency, gt)};
}

MetricReport summarize(std::vector<ImageScore> scores) {
  MetricReport r;
  r.per_image = std::move(scores);
  r.fbw = mean_of(r.per_image, &ImageScore::fbw);
  r.mae = mean_of(r.per_image, &ImageScore::mae);
  return r;
}

void compare_with(MetricReport& report, std::vector<ImageScore> baseline, double alpha) {
  require(baseline.size() == report.per_image.size(), ErrorCode::shape_mismatch,
          "baseline has a different number of images");
  std::vector<double> a_f, b_f, a_m, b_m;
  for (std::size_t k = 0; k < baseline.size(); ++k) {
    require(baseline[k].name == report.per_image[k].name, ErrorCode::shape_mismatch,
            "baseline image '" + baseline[k].name + "' does not pair with '" +
                report.per_image[k].name + "'");
    a_f.push_back(report.per_image[k].fbw);
    b_f.push_back(baseline[k].fbw);
    a_m.push_back(report.per_image[k].mae);
    b_m.push_back(baseline[k].mae);
  }
  report.comparison = Comparison{wilcoxon_signed_rank(a_f, b_f, alpha),
                                 wilcoxon_signed_rank(a_m, b_m, alpha)};
  report.baseline = std::move(baseline);
}

std::string MetricReport::to_json() const {
  nlohmann::json j{{"fbw", fbw}, {"mae", mae}, {"per_image", scores_json(per_image)}};
  if (params) j["params"] = *params;
  if (gflops) j["gflops"] = *gflops;
  if (baseline) {
    j["baseline"] = {{"fbw", mean_of(*baseline, &ImageScore::fbw)},
                     {"mae", mean_of(*baseline, &ImageScore::mae)},
                     {"per_image", scores_json(*baseline)}};
  }
  if (comparison) {
    j["wilcoxon"] = {{"fbw", wilcoxon_json(comparison->fbw)},
                     {"mae", wilcoxon_json(comparison->mae)}};
  }
  return j.dump(2);
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %10s %10s %8s %8s\n", "", "#Params", "FLOPs(G)",
                "F^w_b", "MAE");
  out << line;
  auto row = [&](const char* label, double f, double m, bool with_cost) {
    const std::string p = with_cost && params ? std::to_string(*params) : "-";
    char g[32] = "-";
    if (with_cost && gflops) std::snprintf(g, sizeof g, "%.3f", *gflops);
    std::snprintf(line, sizeof line, "%-12s %10s %10s %8.3f %8.3f\n", label, p.c_str(), g, f, m);
    out << line;
  };
  row("model", fbw, mae, true);
  if (baseline) {
    row("baseline", mean_of(*baseline, &ImageScore::fbw), mean_of(*baseline, &ImageScore::mae),
        false);
  }
  if (comparison) {
    std::snprintf(line, sizeof line, "wilcoxon F^w_b p=%.4g%s  MAE p=%.4g%s\n",
                  comparison->fbw.p_value, comparison->fbw.significant ? " *" : "",
                  comparison->mae.p_value, comparison->mae.significant ? " *" : "");
    out << line;
  }
  return out.str();
}

}  // namespace flim
