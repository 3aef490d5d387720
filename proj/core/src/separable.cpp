#include "flim/separable.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flim/error.hpp"

namespace flim {

void SeparableLayer::validate() const {
  const auto a = static_cast<std::size_t>(depthwise.size);
  const auto f = static_cast<std::size_t>(depthwise.channels);
  require(depthwise.size >= 1 && depthwise.size % 2 == 1 && depthwise.channels >= 1,
          ErrorCode::invariant_violation, "depthwise kernel has an invalid shape");
  require(depthwise.values.size() == a * a * f, ErrorCode::invariant_violation,
          "depthwise kernel length does not match its shape");
  require(!counts.empty(), ErrorCode::invariant_violation, "separable layer has no kernels");
  require(pointwise.size() == counts.size() * f, ErrorCode::invariant_violation,
          "pointwise weights do not match m x f");
  require(std::all_of(counts.begin(), counts.end(), [](int c) { return c >= 1; }),
          ErrorCode::invariant_violation, "kernel counts must be positive");
  auto finite = [](double v) { return std::isfinite(v); };
  require(std::all_of(depthwise.values.begin(), depthwise.values.end(), finite) &&
              std::all_of(pointwise.begin(), pointwise.end(), finite),
          ErrorCode::invariant_violation, "separable weights must be finite");
}

Kernel mean_kernel(const KernelBank& bank) {
  require(!bank.empty(), ErrorCode::invalid_argument, "mean of an empty kernel bank");
  Kernel mean{bank.size(), bank.channels(), std::vector<double>(bank.kernel_length(), 0.0)};
  for (std::size_t c = 0; c < bank.count(); ++c) {
    auto k = bank.kernel(c);
    for (std::size_t t = 0; t < k.size(); ++t) mean.values[t] += k[t];
  }
  const double m = static_cast<double>(bank.count());
  for (double& v : mean.values) v /= m;
  return mean;
}

ChannelImportance channel_importance(const KernelBank& bank, SpreadMeasure spread) {
  require(!bank.empty(), ErrorCode::invalid_argument, "factorizing an empty kernel bank");
  const auto f = static_cast<std::size_t>(bank.channels());
  const std::size_t positions = static_cast<std::size_t>(bank.size()) * bank.size();
  const double samples = static_cast<double>(positions * bank.count());

  ChannelImportance ci;
  ci.mean.assign(f, 0.0);
  ci.spread.assign(f, 0.0);
  for (std::size_t c = 0; c < bank.count(); ++c) {
    auto k = bank.kernel(c);
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t b = 0; b < f; ++b) ci.mean[b] += k[p * f + b];
    }
  }
  for (double& mu : ci.mean) mu /= samples;
  for (std::size_t c = 0; c < bank.count(); ++c) {
    auto k = bank.kernel(c);
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t b = 0; b < f; ++b) {
        const double d = k[p * f + b] - ci.mean[b];
        ci.spread[b] += d * d;
      }
    }
  }
  for (double& s : ci.spread) {
    s /= samples;
    if (spread == SpreadMeasure::stdev) s = std::sqrt(s);
  }

  for (double mu : ci.mean) ci.beta += mu;
  require(std::abs(ci.beta) >= 1e-12, ErrorCode::degenerate_input, "degenerate channel means");
  ci.omega.resize(f);
  for (std::size_t b = 0; b < f; ++b) ci.omega[b] = ci.mean[b] * ci.spread[b] / ci.beta;
  return ci;
}

std::vector<double> pointwise_weights(const KernelBank& bank, std::span<const double> omega) {
  const auto f = static_cast<std::size_t>(bank.channels());
  require(omega.size() == f, ErrorCode::shape_mismatch, "one importance per channel expected");
  const std::size_t positions = static_cast<std::size_t>(bank.size()) * bank.size();
  const double area = static_cast<double>(positions);
  std::vector<double> weights(bank.count() * f, 0.0);
  for (std::size_t c = 0; c < bank.count(); ++c) {
    auto k = bank.kernel(c);
    for (std::size_t b = 0; b < f; ++b) {
      double s = 0.0;
      for (std::size_t p = 0; p < positions; ++p) s += k[p * f + b];
      weights[c * f + b] = omega[b] / area * s;
    }
  }
  return weights;
}

SeparableLayer factorize(const KernelBank& bank, SpreadMeasure spread) {
  const ChannelImportance ci = channel_importance(bank, spread);
  SeparableLayer layer;
  layer.depthwise = mean_kernel(bank);
  layer.pointwise = pointwise_weights(bank, ci.omega);
  layer.counts.assign(bank.counts().begin(), bank.counts().end());
  return layer;
}

Image depthwise_convolve(const Image& img, const Kernel& depthwise, std::span<const int> dilations) {
  require(img.channels() == depthwise.channels, ErrorCode::shape_mismatch,
          "depthwise kernel has " + std::to_string(depthwise.channels) +
              " channels, image has " + std::to_string(img.channels()));
  require(!dilations.empty(), ErrorCode::invalid_argument, "at least one dilation required");
  const int h = img.height(), w = img.width(), f = img.channels();
  Image out(h, w, f);
  std::vector<double> partial(static_cast<std::size_t>(f));
  for (int d : dilations) {
    const Adjacency adj(depthwise.size, d);
    const auto offsets = adj.displacements();
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        std::fill(partial.begin(), partial.end(), 0.0);
        for (std::size_t t = 0; t < offsets.size(); ++t) {
          const int qi = i + offsets[t].di, qj = j + offsets[t].dj;
          if (!img.in_bounds(qi, qj)) continue;
          auto px = img.pixel(qi, qj);
          const double* k = depthwise.values.data() + t * static_cast<std::size_t>(f);
          for (int b = 0; b < f; ++b) partial[b] += px[b] * k[b];
        }
        auto o = out.pixel(i, j);
        for (int b = 0; b < f; ++b) o[b] += partial[b];
      }
    }
  }
  return out;
}

Image pointwise_combine(const Image& depthwise_out, const SeparableLayer& layer) {
  require(depthwise_out.channels() == layer.channels(), ErrorCode::shape_mismatch,
          "pointwise weights do not match the depthwise output channels");
  const int h = depthwise_out.height(), w = depthwise_out.width();
  const auto m = layer.n_kernels();
  Image out(h, w, static_cast<int>(m));
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      auto px = depthwise_out.pixel(i, j);
      auto o = out.pixel(i, j);
      for (std::size_t c = 0; c < m; ++c) {
        auto weights = layer.pointwise_kernel(c);
        double s = 0.0;
        for (std::size_t b = 0; b < weights.size(); ++b) s += px[b] * weights[b];
        o[c] = s;
      }
    }
  }
  return out;
}

Image convolve_separable(const Image& img, const SeparableLayer& layer,
                         std::span<const int> dilations) {
  return pointwise_combine(depthwise_convolve(img, layer.depthwise, dilations), layer);
}

}  // namespace flim
