#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "rangefuse/spline.hpp"
#include "test_util.hpp"

using namespace rangefuse;

namespace {

Eigen::MatrixX2d rows(std::initializer_list<std::pair<double, double>> pts) {
  Eigen::MatrixX2d m(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (auto [x, y] : pts) m.row(i++) << x, y;
  return m;
}

// Dense Gaussian elimination with partial pivoting on a row-major copy.
std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Independent interpolant in raw coordinates: solves the bordered system for
// each output coordinate separately and evaluates the radial sum directly.
Eigen::Vector2d oracle_eval(const Eigen::MatrixX2d& c, const Eigen::MatrixX2d& t, double lambda,
                            Eigen::Vector2d q) {
  const std::size_t n = static_cast<std::size_t>(c.rows());
  std::vector<std::vector<double>> a(n + 3, std::vector<double>(n + 3, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = std::hypot(c(i, 0) - c(j, 0), c(i, 1) - c(j, 1));
    a[i][i] += lambda;
    a[i][n] = a[n][i] = 1.0;
    a[i][n + 1] = a[n + 1][i] = c(i, 0);
    a[i][n + 2] = a[n + 2][i] = c(i, 1);
  }
  Eigen::Vector2d out;
  for (int d = 0; d < 2; ++d) {
    std::vector<double> b(n + 3, 0.0);
    for (std::size_t i = 0; i < n; ++i) b[i] = t(i, d);
    const auto x = gauss_solve(a, b);
    double v = x[n] + x[n + 1] * q.x() + x[n + 2] * q.y();
    for (std::size_t i = 0; i < n; ++i) v += x[i] * std::hypot(q.x() - c(i, 0), q.y() - c(i, 1));
    out(d) = v;
  }
  return out;
}

Eigen::MatrixX2d random_points(std::mt19937_64& rng, int n, double lo, double hi) {
  Eigen::MatrixX2d m(n, 2);
  for (int i = 0; i < n; ++i) m.row(i) << uniform(rng, lo, hi), uniform(rng, lo, hi);
  return m;
}

}  // namespace

TEST(FitSpline, IdentityOnTriangle) {
  const auto c = rows({{0, 0}, {1, 0}, {0, 1}});
  const SplineWarp w = fit_spline(c, c);
  EXPECT_LT(w.weights.cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::Vector2d f = w(0.5, 0.5);
  EXPECT_NEAR(f.x(), 0.5, 1e-12);
  EXPECT_NEAR(f.y(), 0.5, 1e-12);
  const Eigen::Vector2d g = w(7.25, 3.5);
  EXPECT_NEAR(g.x(), 7.25, 1e-12);
  EXPECT_NEAR(g.y(), 3.5, 1e-12);
}

TEST(FitSpline, TranslationReproducedEverywhere) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixX2d c = random_points(rng, 5, 0, 50);
  const Eigen::MatrixX2d t = c.rowwise() + Eigen::RowVector2d(3, -2);
  const SplineWarp w = fit_spline(c, t);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector2d x(uniform(rng, -100, 150), uniform(rng, -100, 150));
    EXPECT_LT((w(x) - (x + Eigen::Vector2d(3, -2))).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(FitSpline, InterpolatesRandomTargets) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixX2d c = random_points(rng, 6, 0, 20);
  const Eigen::MatrixX2d t = random_points(rng, 6, -30, 30);
  const SplineWarp w = fit_spline(c, t);
  for (int i = 0; i < 6; ++i) EXPECT_LT((w(c.row(i).transpose()) - t.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(w.fit_residual, 1e-9);
  const Eigen::MatrixX2d e = eval_spline(w, c);
  EXPECT_LT((e - t).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FitSpline, FourCornerExampleAgainstIndependentSolver) {
  const auto c = rows({{0, 0}, {4, 0}, {0, 4}, {4, 4}});
  const auto t = rows({{0, 0}, {4, 0}, {0, 4}, {5, 5}});
  const SplineWarp w = fit_spline(c, t);
  const Eigen::Vector2d got = w(2, 2);
  const Eigen::Vector2d want = oracle_eval(c, t, 0.0, {2, 2});
  EXPECT_NEAR(got.x(), want.x(), 1e-10);
  EXPECT_NEAR(got.y(), want.y(), 1e-10);
  // Symmetry of the configuration keeps the midpoint on the diagonal.
  EXPECT_NEAR(got.x(), got.y(), 1e-12);
}

TEST(FitSpline, MatchesIndependentSolverOnRandomInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 40);
    const Eigen::MatrixX2d c = random_points(rng, n, 0, 500);
    const Eigen::MatrixX2d t = random_points(rng, n, 0, 1200);
    const double lambda = trial % 3 == 0 ? uniform(rng, 0.1, 10) : 0.0;
    const SplineWarp w = fit_spline(c, t, lambda);
    for (int q = 0; q < 10; ++q) {
      const Eigen::Vector2d x(uniform(rng, 0, 500), uniform(rng, 0, 500));
      const Eigen::Vector2d want = oracle_eval(c, t, lambda, x);
      EXPECT_LT((w(x) - want).cwiseAbs().maxCoeff(), 1e-6 * (1 + want.cwiseAbs().maxCoeff())) << trial;
    }
  }
}

TEST(FitSpline, SideConditionsHold) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 100);
    const Eigen::MatrixX2d c = random_points(rng, n, 0, 512);
    const Eigen::MatrixX2d t = random_points(rng, n, 0, 1242);
    const SplineWarp w = fit_spline(c, t);
    const Eigen::RowVector2d sum_w = w.weights.colwise().sum();
    const Eigen::Matrix2d sum_wc = c.transpose() * w.weights;
    EXPECT_LT(sum_w.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(sum_wc.cwiseAbs().maxCoeff(), 1e-8 * 512);
    EXPECT_LT(w.fit_residual, 1e-6);
  }
}

TEST(FitSpline, AffineTargetsReproducedExactly) {
  std::mt19937_64 rng(5);
  Eigen::Matrix2d a;
  a << 2.4, 0.1, -0.3, 1.7;
  const Eigen::RowVector2d b(100, 50);
  const Eigen::MatrixX2d c = random_points(rng, 40, 0, 512);
  const Eigen::MatrixX2d t = (c * a.transpose()).rowwise() + b;
  const SplineWarp w = fit_spline(c, t);
  EXPECT_LT(w.weights.cwiseAbs().maxCoeff(), 1e-8);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector2d x(uniform(rng, 0, 512), uniform(rng, 0, 64));
    EXPECT_LT((w(x) - (a * x + b.transpose())).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(FitSpline, RegularizationTradesResidualForSmoothness) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixX2d c = random_points(rng, 30, 0, 100);
  const Eigen::MatrixX2d t = c + random_points(rng, 30, -3, 3);
  const SplineWarp exact = fit_spline(c, t, 0.0);
  const SplineWarp smooth = fit_spline(c, t, 50.0);
  EXPECT_LT(exact.fit_residual, 1e-9);
  EXPECT_GT(smooth.fit_residual, 1e-3);
  EXPECT_LT(smooth.weights.cwiseAbs().maxCoeff(), exact.weights.cwiseAbs().maxCoeff());
}

TEST(FitSpline, Errors) {
  EXPECT_THROW(fit_spline(rows({{0, 0}, {1, 1}}), rows({{0, 0}, {1, 1}})), InsufficientControlsError);
  EXPECT_THROW(fit_spline(rows({{0, 0}, {1, 1}, {2, 2}}), rows({{0, 0}, {1, 1}, {2, 2}})),
               DegenerateGeometryError);
  EXPECT_THROW(fit_spline(rows({{3, 3}, {3, 3}, {3, 3}}), rows({{0, 0}, {1, 1}, {2, 2}})),
               DegenerateGeometryError);
  EXPECT_THROW(fit_spline(rows({{0, 0}, {1, 0}, {0, 1}}), rows({{0, 0}, {1, 0}})), ShapeError);
  EXPECT_THROW(fit_spline(rows({{0, 0}, {1, 0}, {0, 1}}), rows({{0, 0}, {1, 0}, {0, 1}}), -1.0), ParameterError);
  try {
    fit_spline(rows({{0, 0}, {1, 0}, {0, 1}, {1, 0}}), rows({{0, 0}, {1, 0}, {0, 1}, {2, 0}}));
    FAIL() << "duplicate controls must not solve";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.condition_estimate(), 1e14);
  }
}

TEST(FitSpline, NearlyCollinearBeyondToleranceStillFits) {
  const auto c = rows({{0, 0}, {100, 0}, {50, 1e-3}});
  const SplineWarp w = fit_spline(c, c);
  EXPECT_LT(w.fit_residual, 1e-6);
}

TEST(FitSpline, CorrespondenceOverloadAndDump) {
  CorrespondenceSet cs{{{{0, 0}, {10, 20}}, {{4, 0}, {18, 20}}, {{0, 2}, {10, 24}}}, {100, 100}, {8, 4}};
  const SplineWarp w = fit_spline(cs);
  const Eigen::Vector2d f = w(2, 1);
  EXPECT_NEAR(f.x(), 14, 1e-10);
  EXPECT_NEAR(f.y(), 22, 1e-10);
  std::ostringstream os;
  dump_spline(os, w);
  EXPECT_EQ(os.str().rfind("controls 3\n", 0), 0u);
  EXPECT_NE(os.str().find("affine\n"), std::string::npos);
}

TEST(EvalSpline, EmptyQueries) {
  const auto c = rows({{0, 0}, {1, 0}, {0, 1}});
  EXPECT_EQ(eval_spline(fit_spline(c, c), Eigen::MatrixX2d(0, 2)).rows(), 0);
}
