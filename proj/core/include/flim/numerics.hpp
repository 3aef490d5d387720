#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flim {

/// Points of a common dimension stored contiguously. Order is significant:
/// clustering is deterministic with respect to it.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int dim) : dim_(dim) {}
  PointSet(int dim, std::vector<double> values);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept {
    return dim_ > 0 ? values_.size() / static_cast<std::size_t>(dim_) : 0;
  }
  bool empty() const noexcept { return size() == 0; }

  std::span<const double> operator[](std::size_t k) const noexcept {
    return {values_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::span<double> operator[](std::size_t k) noexcept {
    return {values_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  void push_back(std::span<const double> point);
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const PointSet&) const = default;

 private:
  int dim_ = 0;
  std::vector<double> values_;
};

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

struct KMeansResult {
  PointSet centers;
  std::vector<int> assignment;        // one center index per input point
  int iterations = 0;
  std::vector<double> inertia_trace;  // within-cluster squared distance per assignment step
};

/// Lloyd's algorithm with k-means++ seeding from a 64-bit Mersenne Twister.
///
/// When k is at least the number of distinct points, the distinct points are
/// returned as centers in lexicographic order and k is clipped. Clusters that
/// empty out during iteration are re-seeded with the point farthest from its
/// current center. Ties in nearest-center search go to the lowest index.
KMeansResult kmeans(const PointSet& points, int k, std::uint64_t seed, int max_iter = 100);

/// Number of histogram bins used by otsu().
inline constexpr int kOtsuBins = 256;

/// Otsu threshold over 256 equal-width bins spanning [min, max]. Returns the
/// bin edge maximizing the between-class variance. When consecutive edges
/// tie (empty bins), the middle edge of the lowest maximizing run wins;
/// returns the common value when all inputs are equal. Values strictly above
/// the threshold form the upper class.
double otsu(std::span<const double> values);

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  double z = 0.0;          // continuity-corrected normal deviate
  double p_normal = 1.0;   // two-sided, normal approximation with tie correction
  double p_value = 1.0;    // exact for n <= kWilcoxonExactMaxN, else p_normal
  std::size_t n = 0;       // non-zero differences
  bool significant = false;
};

inline constexpr std::size_t kWilcoxonExactMaxN = 12;

/// Two-sided paired signed-rank test on x - y. Zero differences are dropped;
/// fewer than six remaining pairs is an error.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    double alpha = 0.05);

}  // namespace flim
