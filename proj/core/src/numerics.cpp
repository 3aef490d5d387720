#include "flim/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "flim/error.hpp"

namespace flim {

PointSet::PointSet(int dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
  require(dim >= 1, ErrorCode::invalid_argument, "point dimension must be >= 1");
  require(values_.size() % static_cast<std::size_t>(dim) == 0, ErrorCode::shape_mismatch,
          "point values are not a multiple of the dimension");
}

void PointSet::push_back(std::span<const double> point) {
  require(dim_ >= 1 && point.size() == static_cast<std::size_t>(dim_), ErrorCode::shape_mismatch,
          "point dimension mismatch");
  values_.insert(values_.end(), point.begin(), point.end());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

namespace {

// Uniform double in [0, 1) from the top 53 bits; std::uniform_real_distribution
// is not reproducible across standard libraries.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

struct Nearest {
  int index;
  double distance;
};

Nearest nearest_center(std::span<const double> p, const PointSet& centers) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = squared_distance(p, centers[c]);
    if (d < best.distance) best = {static_cast<int>(c), d};
  }
  return best;
}

}  // namespace

KMeansResult kmeans(const PointSet& points, int k, std::uint64_t seed, int max_iter) {
  require(!points.empty(), ErrorCode::invalid_argument, "k-means on an empty point set");
  require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
  require(max_iter >= 1, ErrorCode::invalid_argument, "max_iter must be >= 1");
  const std::size_t n = points.size();
  const int dim = points.dim();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lex_less(points[a], points[b]); });
  std::vector<std::size_t> distinct;
  for (std::size_t idx : order) {
    if (distinct.empty() || lex_less(points[distinct.back()], points[idx])) distinct.push_back(idx);
  }

  KMeansResult result;
  if (static_cast<std::size_t>(k) >= distinct.size()) {
    result.centers = PointSet(dim);
    for (std::size_t idx : distinct) result.centers.push_back(points[idx]);
    result.assignment.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
      result.assignment[p] = nearest_center(points[p], result.centers).index;
    }
    result.inertia_trace.push_back(0.0);
    return result;
  }

  std::mt19937_64 rng(seed);
  PointSet centers(dim);
  centers.push_back(points[std::min(n - 1, static_cast<std::size_t>(unit_draw(rng) * n))]);
  std::vector<double> d2(n);
  for (std::size_t p = 0; p < n; ++p) d2[p] = squared_distance(points[p], centers[0]);
  while (centers.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = unit_draw(rng) * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t p = 0; p < n; ++p) {
      if (d2[p] <= 0.0) continue;
      acc += d2[p];
      pick = p;
      if (acc > target) break;
    }
    centers.push_back(points[pick]);
    for (std::size_t p = 0; p < n; ++p) {
      d2[p] = std::min(d2[p], squared_distance(points[p], centers[centers.size() - 1]));
    }
  }

  std::vector<int> assignment(n, -1);
  std::vector<double> dist(n);
  auto assign = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const Nearest nc = nearest_center(points[p], centers);
      changed |= nc.index != assignment[p];
      assignment[p] = nc.index;
      dist[p] = nc.distance;
      inertia += nc.distance;
    }
    result.inertia_trace.push_back(inertia);
    return changed;
  };

  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    if (!assign()) {
      converged = true;
      break;
    }
    ++result.iterations;

    std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (std::size_t p = 0; p < n; ++p) {
      const auto c = static_cast<std::size_t>(assignment[p]);
      ++sizes[c];
      auto pt = points[p];
      for (int d = 0; d < dim; ++d) sums[c * dim + d] += pt[d];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      auto center = centers[c];
      if (sizes[c] > 0) {
        for (int d = 0; d < dim; ++d) center[d] = sums[c * dim + d] / static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: take over the point that is worst served.
      std::size_t far = 0;
      for (std::size_t p = 1; p < n; ++p) {
        if (dist[p] > dist[far]) far = p;
      }
      auto pt = points[far];
      std::copy(pt.begin(), pt.end(), center.begin());
      dist[far] = 0.0;
    }
  }
  if (!converged) assign();
  result.centers = std::move(centers);
  result.assignment = std::move(assignment);
  return result;
}

double otsu(std::span<const double> values) {
  require(!values.empty(), ErrorCode::invalid_argument, "otsu on an empty distribution");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return lo;

  // edge[k] is the threshold candidate between bins k - 1 and k. A value falls
  // in bin k when exactly k edges lie strictly below it, so the lower class of
  // edge k is precisely {v <= edge[k]}.
  const double width = (hi - lo) / kOtsuBins;
  std::array<double, kOtsuBins - 1> edge{};
  for (int k = 1; k < kOtsuBins; ++k) edge[k - 1] = lo + k * width;
  std::vector<long double> count(kOtsuBins, 0.0L), sum(kOtsuBins, 0.0L);
  for (double v : values) {
    const auto bin = std::lower_bound(edge.begin(), edge.end(), v) - edge.begin();
    count[bin] += 1.0L;
    sum[bin] += v;
  }
  const long double n = static_cast<long double>(values.size());
  const long double total = std::accumulate(sum.begin(), sum.end(), 0.0L);

  // Between-class variance up to the constant 1/n^2, as (s0 n1 - s1 n0)^2 / (n0 n1).
  // Extended precision keeps equal scores equal on integer-valued data. Empty
  // bins make runs of consecutive edges score identically; the middle edge of
  // the lowest maximizing run is returned, so a gap between two clusters is
  // split in half rather than hugging the lower cluster.
  std::vector<long double> score(kOtsuBins, -1.0L);
  long double n0 = 0.0L, s0 = 0.0L;
  long double best = -1.0L;
  for (int k = 1; k < kOtsuBins; ++k) {
    n0 += count[k - 1];
    s0 += sum[k - 1];
    const long double n1 = n - n0;
    if (n0 == 0.0L || n1 == 0.0L) continue;
    const long double num = s0 * n1 - (total - s0) * n0;
    score[k] = num * num / (n0 * n1);
    best = std::max(best, score[k]);
  }
  int first = 1;
  while (score[first] != best) ++first;
  int last = first;
  while (last + 1 < kOtsuBins && score[last + 1] == best) ++last;
  return edge[(first + last) / 2 - 1];
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    double alpha) {
  require(x.size() == y.size(), ErrorCode::shape_mismatch, "paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  require(n >= 6, ErrorCode::insufficient_samples, "insufficient paired samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });
  // Doubled mid-ranks are integers, which keeps the exact null distribution in
  // integer arithmetic.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end + 1 < n && std::abs(diffs[order[end + 1]]) == std::abs(diffs[order[start]])) ++end;
    const long twice_mid = static_cast<long>(start + 1 + end + 1);
    for (std::size_t k = start; k <= end; ++k) rank2[order[k]] = twice_mid;
    const double t = static_cast<double>(end - start + 1);
    tie_term += t * t * t - t;
    start = end + 1;
  }

  long w2 = 0, total2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    total2 += rank2[k];
    if (diffs[k] > 0.0) w2 += rank2[k];
  }

  WilcoxonResult r;
  r.n = n;
  r.statistic = static_cast<double>(w2) / 2.0;
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double dev = std::abs(r.statistic - mean);
  r.z = var > 0.0 ? std::max(0.0, dev - 0.5) / std::sqrt(var) : 0.0;
  r.p_normal = std::min(1.0, std::erfc(r.z / std::sqrt(2.0)));

  if (n <= kWilcoxonExactMaxN) {
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (long s = total2; s >= rank2[k]; --s) ways[s] += ways[s - rank2[k]];
    }
    const long observed = std::labs(2 * w2 - total2);
    double extreme = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (std::labs(2 * s - total2) >= observed) extreme += ways[s];
    }
    r.p_value = std::min(1.0, extreme / std::ldexp(1.0, static_cast<int>(n)));
  } else {
    r.p_value = r.p_normal;
  }
  r.significant = r.p_value < alpha;
  return r;
}

}  // namespace flim
