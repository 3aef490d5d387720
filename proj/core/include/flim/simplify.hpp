#pragma once

#include <span>
#include <string>
#include <vector>

#include "flim/encoder.hpp"
#include "flim/kernel.hpp"

namespace flim {

/// Upsilon(k_i) = (1/m) sum_j D^2(k_i, k_j), self term included.
std::vector<double> uniqueness(const KernelBank& bank);

/// Nearest other kernel by squared distance; lowest index wins ties. A bank
/// of one kernel maps it to itself.
std::vector<std::size_t> nearest_neighbors(const KernelBank& bank);

/// Bookkeeping of one removal pass.
struct SimplifyPass {
  std::vector<double> uniqueness;
  std::vector<std::size_t> nearest;
  double mean_uniqueness = 0.0;
  std::vector<std::size_t> removed;      // indices into the pass-entry bank
  std::vector<int> counts_before_bake;   // survivors, in bank order
};

/// One pass: kernels whose uniqueness is strictly below the bank mean are
/// removed in bank order, provided their nearest neighbour is still present;
/// the neighbour inherits the removed kernel's count. Survivors are then
/// scaled by their counts and the counts reset to one.
SimplifyPass simplify_pass(KernelBank& bank);

struct SimplifyReport {
  int iterations = 0;
  int initial_m = 0;
  int final_m = 0;
  std::vector<int> removed_per_iteration;
  std::vector<double> uniqueness_mean_trace;

  std::string to_json() const;
};

struct SimplifyResult {
  KernelBank bank;
  SimplifyReport report;
};

/// Repeats simplify_pass n times (n >= 1).
SimplifyResult simplify_layer(const KernelBank& bank, int n);

/// Training data needed to re-learn the layers after a simplified one.
struct RetrainContext {
  std::span<const Image> images;
  std::span<const MarkerSet> markers;
  TrainOptions options;
};

struct NetworkSimplifyResult {
  Model model;
  SimplifyReport report;
};

/// Simplifies the regular bank of `layer_index` (re-factorizing separable
/// layers) and retrains every later layer. `context` may be null only when
/// the last layer is simplified.
NetworkSimplifyResult simplify_network(const Model& model, std::size_t layer_index, int n,
                                       const RetrainContext* context);

}  // namespace flim
