#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "flim/error.hpp"
#include "flim/numerics.hpp"
#include "oracles.hpp"
#include "random.hpp"

namespace flim {
namespace {

PointSet points_2d(const std::vector<std::pair<double, double>>& pts) {
  PointSet s(2);
  for (auto [x, y] : pts) s.push_back(std::vector<double>{x, y});
  return s;
}

TEST(KMeansTest, SingleClusterIsTheMean) {
  const PointSet pts = points_2d({{0, 0}, {2, 0}, {4, 6}, {2, 2}});
  const auto r = kmeans(pts, 1, 5);
  ASSERT_EQ(r.centers.size(), 1u);
  EXPECT_DOUBLE_EQ(r.centers[0][0], 2.0);
  EXPECT_DOUBLE_EQ(r.centers[0][1], 2.0);
}

TEST(KMeansTest, TwoObviousClusters) {
  const PointSet pts = points_2d({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  const auto r = kmeans(pts, 2, 0);
  ASSERT_EQ(r.centers.size(), 2u);
  std::set<std::pair<double, double>> got;
  for (std::size_t c = 0; c < 2; ++c) got.insert({r.centers[c][0], r.centers[c][1]});
  EXPECT_EQ(got, (std::set<std::pair<double, double>>{{0, 0.5}, {10, 0.5}}));
  EXPECT_EQ(r.assignment[0], r.assignment[1]);
  EXPECT_NE(r.assignment[0], r.assignment[2]);
}

TEST(KMeansTest, KAtLeastDistinctReturnsSortedPoints) {
  const PointSet pts = points_2d({{3, 1}, {1, 2}, {3, 1}, {1, 0}});
  const auto r = kmeans(pts, 5, 9);
  EXPECT_EQ(r.centers, points_2d({{1, 0}, {1, 2}, {3, 1}}));
  EXPECT_EQ(r.assignment, (std::vector<int>{2, 1, 2, 0}));
}

TEST(KMeansTest, Errors) {
  EXPECT_THROW(kmeans(PointSet(2), 1, 0), Error);
  EXPECT_THROW(kmeans(points_2d({{0, 0}}), 0, 0), Error);
}

TEST(KMeansTest, DeterministicAndMonotone) {
  test::Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = rng.integer(1, 6);
    const int n = rng.integer(1, 80);
    std::vector<double> v(static_cast<std::size_t>(n) * dim);
    for (double& x : v) x = rng.coin(0.3) ? rng.integer(-2, 2) : rng.uniform(-3, 3);
    const PointSet pts(dim, v);
    const int k = rng.integer(1, 10);
    const std::uint64_t seed = rng.bits();
    const auto a = kmeans(pts, k, seed);
    const auto b = kmeans(pts, k, seed);
    EXPECT_EQ(a.centers, b.centers);
    EXPECT_EQ(a.assignment, b.assignment);
    for (std::size_t t = 1; t < a.inertia_trace.size(); ++t) {
      EXPECT_LE(a.inertia_trace[t], a.inertia_trace[t - 1] * (1 + 1e-12) + 1e-12);
    }
    EXPECT_LE(a.centers.size(), static_cast<std::size_t>(k));
    for (int c : a.assignment) {
      EXPECT_GE(c, 0);
      EXPECT_LT(static_cast<std::size_t>(c), a.centers.size());
    }
  }
}

TEST(OtsuTest, Examples) {
  EXPECT_EQ(otsu(std::vector<double>{0, 0, 1, 1}), 0.5);
  EXPECT_EQ(otsu(std::vector<double>{3.25, 3.25, 3.25}), 3.25);
  EXPECT_EQ(otsu(std::vector<double>{7}), 7);
  const double t = otsu(std::vector<double>{0, 0, 0, 10});
  EXPECT_GE(t, 0.0);
  EXPECT_LT(t, 10.0);
  EXPECT_EQ(t, 5.0);
}

TEST(OtsuTest, SplitsTwoClusters) {
  const double t = otsu(std::vector<double>{0.1, 0.12, 0.11, 0.8, 0.82, 0.79, 0.81});
  EXPECT_GT(t, 0.12);
  EXPECT_LT(t, 0.79);
}

TEST(OtsuTest, MatchesExhaustiveScanOnIntegerHistograms) {
  test::Rng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.integer(1, 60)));
    const int hi = rng.integer(1, 1000);
    for (double& x : v) x = rng.integer(0, hi);
    ASSERT_EQ(otsu(v), test::otsu_integer_oracle(v)) << "trial " << trial;
  }
}

TEST(OtsuTest, StaysWithinRange) {
  test::Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.integer(1, 50)));
    for (double& x : v) x = rng.uniform(-5, 5);
    const double t = otsu(v);
    EXPECT_GE(t, *std::min_element(v.begin(), v.end()));
    EXPECT_LE(t, *std::max_element(v.begin(), v.end()));
  }
}

TEST(WilcoxonTest, TooFewPairs) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7};
  try {
    wilcoxon_signed_rank(x, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_samples);
  }
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
}

TEST(WilcoxonTest, ConstantShiftIsSignificant) {
  std::vector<double> y{0.3, 0.1, 0.9, 0.5, 0.2, 0.7, 0.4, 0.6, 0.8, 0.05};
  std::vector<double> x = y;
  for (double& v : x) v += 1.0;
  const auto r = wilcoxon_signed_rank(x, y, 0.05);
  EXPECT_EQ(r.n, 10u);
  EXPECT_DOUBLE_EQ(r.statistic, 55.0);  // all ranks positive: 1 + ... + 10
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 1024.0);
  EXPECT_TRUE(r.significant);
}

TEST(WilcoxonTest, AlternatingSignsAtCentre) {
  std::vector<double> x, y;
  for (int k = 0; k < 8; ++k) {
    x.push_back(k % 2 == 0 ? 1.0 : -1.0);
    y.push_back(0.0);
  }
  const auto r = wilcoxon_signed_rank(x, y);
  EXPECT_DOUBLE_EQ(r.statistic, 18.0);  // half of 8 * 4.5
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.significant);
}

TEST(WilcoxonTest, ExactPMatchesEnumeration) {
  test::Rng rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.integer(6, 12);
    std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n), 0.0), d;
    for (double& v : x) {
      v = rng.integer(1, 4) * (rng.coin() ? 1.0 : -1.0);  // heavy ties
      d.push_back(v);
    }
    const auto r = wilcoxon_signed_rank(x, y);
    EXPECT_NEAR(r.p_value, test::wilcoxon_exact_oracle(d), 1e-12) << "trial " << trial;
  }
}

TEST(WilcoxonTest, NormalApproximationForLargeSamples) {
  test::Rng rng(25);
  std::vector<double> x(40), y(40);
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = rng.uniform();
    y[k] = rng.uniform();
  }
  const auto r = wilcoxon_signed_rank(x, y);
  EXPECT_EQ(r.p_value, r.p_normal);
  // Recompute the continuity-corrected normal approximation (no ties).
  const double n = 40, mean = n * (n + 1) / 4, sd = std::sqrt(n * (n + 1) * (2 * n + 1) / 24);
  const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / sd;
  EXPECT_NEAR(r.p_normal, std::erfc(z / std::sqrt(2.0)), 1e-12);
}

}  // namespace
}  // namespace flim
