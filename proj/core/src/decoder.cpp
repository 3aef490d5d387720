#include "flim/decoder.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "flim/error.hpp"
#include "flim/numerics.hpp"

namespace flim {

std::string DecoderWeights::to_json() const {
  return nlohmann::json{{"alpha", alpha}, {"means", means}, {"psi", psi},
                        {"tau", tau},     {"sigma2", sigma2}, {"margin", margin}}
      .dump();
}

int channel_polarity(double mean, double tau, double margin, double psi,
                     const DecoderConfig& config) {
  const bool foreground = mean <= tau - margin && psi > config.foreground_ratio_min;
  const bool background = mean >= tau + margin && psi < config.background_ratio_max;
  if (foreground == background) return 0;
  return foreground ? 1 : -1;
}

double foreground_ratio(const Image& feat, int channel) {
  require(channel >= 0 && channel < feat.channels(), ErrorCode::out_of_bounds,
          "channel index out of range");
  std::vector<double> values(feat.pixel_count());
  for (std::size_t p = 0; p < values.size(); ++p) {
    values[p] = feat.data()[p * static_cast<std::size_t>(feat.channels()) + channel];
  }
  const double t = otsu(values);
  const auto above = std::count_if(values.begin(), values.end(), [t](double v) { return v > t; });
  return static_cast<double>(above) / static_cast<double>(values.size());
}

DecoderWeights adapt_from_statistics(std::vector<double> means, std::vector<double> psi,
                                     const DecoderConfig& config) {
  require(means.size() == psi.size(), ErrorCode::shape_mismatch,
          "one foreground ratio per channel expected");
  require(means.size() >= 2, ErrorCode::invalid_argument, "decoder needs multiple channels");
  DecoderWeights w;
  w.means = std::move(means);
  w.psi = std::move(psi);
  w.tau = otsu(w.means);
  double mu = 0.0;
  for (double v : w.means) mu += v;
  mu /= static_cast<double>(w.means.size());
  for (double v : w.means) w.sigma2 += (v - mu) * (v - mu);
  w.sigma2 /= static_cast<double>(w.means.size());
  w.margin = config.margin == DecoderMargin::variance ? w.sigma2 : std::sqrt(w.sigma2);
  w.alpha.resize(w.means.size());
  for (std::size_t b = 0; b < w.means.size(); ++b) {
    w.alpha[b] = channel_polarity(w.means[b], w.tau, w.margin, w.psi[b], config);
  }
  return w;
}

DecoderWeights adapt_weights(const Image& feat, const DecoderConfig& config) {
  require(feat.channels() >= 2, ErrorCode::invalid_argument, "decoder needs multiple channels");
  const auto f = static_cast<std::size_t>(feat.channels());
  std::vector<double> means(f, 0.0), psi(f, 0.0);
  auto data = feat.data();
  for (std::size_t k = 0; k < data.size(); ++k) means[k % f] += data[k];
  for (double& m : means) m /= static_cast<double>(feat.pixel_count());
  for (std::size_t b = 0; b < f; ++b) psi[b] = foreground_ratio(feat, static_cast<int>(b));
  return adapt_from_statistics(std::move(means), std::move(psi), config);
}

Image decode(const Image& feat, const DecoderWeights& weights) {
  require(weights.alpha.size() == static_cast<std::size_t>(feat.channels()),
          ErrorCode::shape_mismatch, "decoder weights do not match feature channels");
  Image s(feat.height(), feat.width(), 1);
  const auto f = weights.alpha.size();
  auto data = feat.data();
  auto out = s.data();
  for (std::size_t p = 0; p < out.size(); ++p) {
    double v = 0.0;
    for (std::size_t b = 0; b < f; ++b) v += weights.alpha[b] * data[p * f + b];
    out[p] = std::max(v, 0.0);
  }
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo, max = *hi;
  for (double& v : out) {
    if (max > min) {
      v = (v - min) / (max - min);
    } else {
      v = max > 0.0 ? 1.0 : 0.0;
    }
  }
  return s;
}

SaliencyResult saliency(const Model& model, const Image& img, std::optional<std::size_t> layer_index,
                        const DecoderConfig& config) {
  require(!model.layers.empty(), ErrorCode::invalid_argument, "model has no layers");
  const std::size_t layer = layer_index.value_or(model.layers.size() - 1);
  const Image raw = run_encoder(model, img, layer);
  const Image feat =
      config.scaling == FeatureScaling::per_channel ? rescale_channels(raw) : rescale_unit(raw);
  SaliencyResult r;
  r.weights = adapt_weights(feat, config);
  r.map = upsample_bilinear(decode(feat, r.weights), img.height(), img.width());
  for (double& v : r.map.data()) v = std::clamp(v, 0.0, 1.0);
  return r;
}

}  // namespace flim
