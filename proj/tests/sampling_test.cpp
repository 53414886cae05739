#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "rangefuse/sampling.hpp"
#include "test_util.hpp"

using namespace rangefuse;

namespace {

// O(M^2 k) greedy: recompute every candidate's distance to the whole set.
std::vector<std::size_t> brute_force_fps(const Eigen::MatrixX2d& p, std::size_t k, std::size_t seed) {
  std::vector<std::size_t> sel{seed};
  while (sel.size() < k) {
    std::size_t best = 0;
    double best_d = -1;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      bool taken = false;
      for (auto s : sel) taken |= s == static_cast<std::size_t>(i);
      if (taken) continue;
      double d = std::numeric_limits<double>::infinity();
      for (auto s : sel) d = std::min(d, (p.row(i) - p.row(static_cast<Eigen::Index>(s))).squaredNorm());
      if (d > best_d) {
        best_d = d;
        best = static_cast<std::size_t>(i);
      }
    }
    sel.push_back(best);
  }
  return sel;
}

// Scalar reference: explicit four-neighbor blend for one channel.
double scalar_bilinear(const FeatureGrid& g, double x, double y, int c) {
  const int w = g.width(), h = g.height();
  if (x < 0 || y < 0 || x > w - 1 || y > h - 1) return 0.0;
  const int i = static_cast<int>(x), j = static_cast<int>(y);
  const int i1 = i + 1 < w ? i + 1 : i;
  const int j1 = j + 1 < h ? j + 1 : j;
  const double a = x - i, b = y - j;
  const double top = g.at(i, j, c) + a * (g.at(i1, j, c) - g.at(i, j, c));
  const double bot = g.at(i, j1, c) + a * (g.at(i1, j1, c) - g.at(i, j1, c));
  return top + b * (bot - top);
}

FeatureGrid two_by_two() { return FeatureGrid::image(2, 2, 1, {0, 1, 2, 3}); }

}  // namespace

TEST(FarthestPointSample, PicksFarEnd) {
  Eigen::MatrixX2d p(4, 2);
  p << 0, 0, 1, 0, 2, 0, 10, 0;
  EXPECT_EQ(farthest_point_sample(p, 2, 0), (std::vector<std::size_t>{0, 3}));
}

TEST(FarthestPointSample, FullSelectionStartsAtSeed) {
  std::mt19937_64 rng(1);
  Eigen::MatrixX2d p(15, 2);
  for (int i = 0; i < 15; ++i) p.row(i) << uniform(rng, 0, 1), uniform(rng, 0, 1);
  const auto sel = farthest_point_sample(p, 15, 7);
  EXPECT_EQ(sel.front(), 7u);
  EXPECT_EQ(std::set<std::size_t>(sel.begin(), sel.end()).size(), 15u);
}

TEST(FarthestPointSample, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 20 + static_cast<int>(rng() % 60);
    Eigen::MatrixX2d p(m, 2);
    for (int i = 0; i < m; ++i) p.row(i) << uniform(rng, 0, 512), uniform(rng, 0, 64);
    const std::size_t k = 1 + rng() % m;
    const std::size_t seed = rng() % m;
    EXPECT_EQ(farthest_point_sample(p, k, seed), brute_force_fps(p, k, seed)) << trial;
  }
  Eigen::MatrixX2d p(20, 2);
  for (int i = 0; i < 20; ++i) p.row(i) << uniform(rng, 0, 1), uniform(rng, 0, 1);
  EXPECT_EQ(farthest_point_sample(p, 5, 0), brute_force_fps(p, 5, 0));
}

TEST(FarthestPointSample, TiesGoToSmallestIndexOnIntegerGrid) {
  Eigen::MatrixX2d p(25, 2);
  for (int i = 0; i < 25; ++i) p.row(i) << i % 5, i / 5;
  EXPECT_EQ(farthest_point_sample(p, 10, 12), brute_force_fps(p, 10, 12));
  // From the center, all four corners tie; index 0 wins.
  EXPECT_EQ(farthest_point_sample(p, 2, 12)[1], 0u);
}

TEST(FarthestPointSample, Properties) {
  std::mt19937_64 rng(3);
  Eigen::MatrixX2d p(200, 2);
  for (int i = 0; i < 200; ++i) p.row(i) << uniform(rng, 0, 512), uniform(rng, 0, 64);
  const auto a = farthest_point_sample(p, 40, 5);
  const auto b = farthest_point_sample(p, 20, 5);
  // Prefix property: a smaller k is a prefix of a larger one.
  EXPECT_TRUE(std::equal(b.begin(), b.end(), a.begin()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
  // The covering radius never grows as more points are added.
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= 40; ++k) {
    double radius = 0;
    for (int i = 0; i < 200; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < k; ++s) d = std::min(d, (p.row(i) - p.row(static_cast<Eigen::Index>(a[s]))).norm());
      radius = std::max(radius, d);
    }
    EXPECT_LE(radius, prev + 1e-12);
    prev = radius;
  }
}

TEST(FarthestPointSample, Errors) {
  Eigen::MatrixX2d p(3, 2);
  p << 0, 0, 1, 0, 0, 1;
  EXPECT_THROW(farthest_point_sample(p, 4, 0), ParameterError);
  EXPECT_THROW(farthest_point_sample(p, 0, 0), ParameterError);
  EXPECT_THROW(farthest_point_sample(p, 2, 3), ParameterError);
}

TEST(BilinearSample, Examples) {
  const FeatureGrid g = two_by_two();
  EXPECT_FLOAT_EQ(bilinear_sample(g, 0.5, 0.5)[0], 1.5f);
  EXPECT_FLOAT_EQ(bilinear_sample(g, 0, 0)[0], 0.0f);
  EXPECT_EQ(bilinear_sample(g, -1, -1), std::vector<float>{0.0f});
  EXPECT_FLOAT_EQ(bilinear_sample(g, 1, 1)[0], 3.0f);  // closed upper edge
  EXPECT_FLOAT_EQ(bilinear_sample(g, 1, 0.5)[0], 2.0f);
  EXPECT_EQ(bilinear_sample(g, 1.0001, 0.5)[0], 0.0f);
}

TEST(BilinearSample, ExactAtGridNodes) {
  std::mt19937_64 rng(4);
  FeatureGrid g = FeatureGrid::image(7, 5, 3);
  for (auto& v : g.data()) v = static_cast<float>(uniform(rng, -1, 1));
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(bilinear_sample(g, x, y)[c], g.at(x, y, c));
}

TEST(BilinearSample, MatchesScalarReference) {
  std::mt19937_64 rng(5);
  FeatureGrid g = FeatureGrid::image(13, 9, 4);
  for (auto& v : g.data()) v = static_cast<float>(uniform(rng, -5, 5));
  for (int q = 0; q < 2000; ++q) {
    const double x = uniform(rng, -1.5, 13.5), y = uniform(rng, -1.5, 9.5);
    const auto s = bilinear_sample(g, x, y);
    for (int c = 0; c < 4; ++c) ASSERT_NEAR(s[c], scalar_bilinear(g, x, y, c), 1e-5);
  }
}

TEST(BilinearSample, AffineFunctionsReproduced) {
  FeatureGrid g = FeatureGrid::image(10, 6, 1);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 10; ++x) g.at(x, y, 0) = static_cast<float>(1.5 * x - 0.5 * y + 2);
  std::mt19937_64 rng(6);
  for (int q = 0; q < 500; ++q) {
    const double x = uniform(rng, 0, 9), y = uniform(rng, 0, 5);
    EXPECT_NEAR(bilinear_sample(g, x, y)[0], 1.5 * x - 0.5 * y + 2, 1e-5);
  }
}

TEST(BilinearSample, SingleCellGrid) {
  const FeatureGrid g = FeatureGrid::image(1, 1, 2, {4, 5});
  EXPECT_EQ(bilinear_sample(g, 0, 0), (std::vector<float>{4, 5}));
  EXPECT_EQ(bilinear_sample(g, 0.1, 0), (std::vector<float>{0, 0}));
}

TEST(BilinearSample, RoundOffAtEdgeIsSnapped) {
  const FeatureGrid g = two_by_two();
  EXPECT_FLOAT_EQ(bilinear_sample(g, -1e-12, 0.5)[0], 1.0f);
  EXPECT_FLOAT_EQ(bilinear_sample(g, 1 + 1e-12, 1 + 1e-12)[0], 3.0f);
  EXPECT_EQ(bilinear_sample(g, -1e-6, 0.5)[0], 0.0f);
}
