#include "flim/simplify.hpp"

#include <limits>

#include <json.hpp>

#include "flim/error.hpp"
#include "flim/numerics.hpp"

namespace flim {

namespace {

std::vector<double> distance_matrix(const KernelBank& bank) {
  const std::size_t m = bank.count();
  std::vector<double> d(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      d[i * m + j] = d[j * m + i] = squared_distance(bank.kernel(i), bank.kernel(j));
    }
  }
  return d;
}

std::vector<double> uniqueness_from(const std::vector<double>& d, std::size_t m) {
  std::vector<double> u(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += d[i * m + j];
    u[i] = s / static_cast<double>(m);
  }
  return u;
}

std::vector<std::size_t> nearest_from(const std::vector<double>& d, std::size_t m) {
  std::vector<std::size_t> nn(m);
  for (std::size_t i = 0; i < m; ++i) {
    nn[i] = i;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      if (d[i * m + j] < best) {
        best = d[i * m + j];
        nn[i] = j;
      }
    }
  }
  return nn;
}

}  // namespace

std::vector<double> uniqueness(const KernelBank& bank) {
  return uniqueness_from(distance_matrix(bank), bank.count());
}

std::vector<std::size_t> nearest_neighbors(const KernelBank& bank) {
  return nearest_from(distance_matrix(bank), bank.count());
}

SimplifyPass simplify_pass(KernelBank& bank) {
  const std::size_t m = bank.count();
  require(m >= 1, ErrorCode::invalid_argument, "simplifying an empty kernel bank");
  const auto d = distance_matrix(bank);

  SimplifyPass pass;
  pass.uniqueness = uniqueness_from(d, m);
  pass.nearest = nearest_from(d, m);
  double total = 0.0;
  for (double u : pass.uniqueness) total += u;
  pass.mean_uniqueness = total / static_cast<double>(m);

  std::vector<bool> present(m, true);
  std::vector<int> counts(bank.counts().begin(), bank.counts().end());
  for (std::size_t i = 0; i < m; ++i) {
    if (!(pass.uniqueness[i] < pass.mean_uniqueness)) continue;
    const std::size_t nn = pass.nearest[i];
    if (nn == i || !present[nn]) continue;
    // Carry the whole count so represented kernels are conserved even when a
    // kernel that already absorbed others is removed later in the pass.
    counts[nn] += counts[i];
    present[i] = false;
    pass.removed.push_back(i);
  }

  KernelBank survivors(bank.size(), bank.channels());
  std::vector<double> scaled(bank.kernel_length());
  for (std::size_t i = 0; i < m; ++i) {
    if (!present[i]) continue;
    pass.counts_before_bake.push_back(counts[i]);
    auto k = bank.kernel(i);
    for (std::size_t t = 0; t < k.size(); ++t) scaled[t] = k[t] * counts[i];
    survivors.push_back(scaled, 1);
  }
  bank = std::move(survivors);
  return pass;
}

std::string SimplifyReport::to_json() const {
  return nlohmann::json{{"iterations", iterations},
                        {"initial_m", initial_m},
                        {"final_m", final_m},
                        {"removed_per_iteration", removed_per_iteration},
                        {"uniqueness_mean_trace", uniqueness_mean_trace}}
      .dump(2);
}

SimplifyResult simplify_layer(const KernelBank& bank, int n) {
  require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
  require(!bank.empty(), ErrorCode::invalid_argument, "simplifying an empty kernel bank");
  SimplifyResult result{bank, {}};
  result.report.initial_m = static_cast<int>(bank.count());
  for (int it = 0; it < n; ++it) {
    const SimplifyPass pass = simplify_pass(result.bank);
    result.report.removed_per_iteration.push_back(static_cast<int>(pass.removed.size()));
    result.report.uniqueness_mean_trace.push_back(pass.mean_uniqueness);
    ++result.report.iterations;
  }
  result.report.final_m = static_cast<int>(result.bank.count());
  return result;
}

NetworkSimplifyResult simplify_network(const Model& model, std::size_t layer_index, int n,
                                       const RetrainContext* context) {
  require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
  require(layer_index < model.layers.size(), ErrorCode::out_of_bounds,
          "layer " + std::to_string(layer_index + 1) + " does not exist");
  const bool has_downstream = layer_index + 1 < model.layers.size();
  require(!has_downstream || context != nullptr, ErrorCode::invalid_argument,
          "missing training context for retraining downstream layers");

  NetworkSimplifyResult out{model, {}};
  TrainedLayer& layer = out.model.layers[layer_index];
  SimplifyResult simplified = simplify_layer(layer.bank, n);
  // Baking counts into float kernels can need more than 24 mantissa bits.
  for (double& v : simplified.bank.values()) v = static_cast<double>(static_cast<float>(v));
  layer.bank = std::move(simplified.bank);
  out.report = std::move(simplified.report);
  if (layer.separable) {
    const SpreadMeasure spread = context ? context->options.layer.spread : SpreadMeasure::variance;
    SeparableLayer sep = factorize(layer.bank, spread);
    for (double& v : sep.depthwise.values) v = static_cast<double>(static_cast<float>(v));
    for (double& v : sep.pointwise) v = static_cast<double>(static_cast<float>(v));
    layer.separable = std::move(sep);
  }
  if (has_downstream) {
    retrain_from(out.model, context->images, context->markers, layer_index + 1, context->options);
  }
  return out;
}

}  // namespace flim
