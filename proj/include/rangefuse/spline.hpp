#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "rangefuse/error.hpp"
#include "rangefuse/projection.hpp"

namespace rangefuse {

// First-order polyharmonic spline R^2 -> R^2:
//
//   f(x) = sum_i w_i * |x - c_i|_2 + V^T [1; x]
//
// with side conditions sum_i w_i = 0 and sum_i w_i c_i^T = 0.
struct SplineWarp {
  Eigen::MatrixX2d controls;  // N x 2, range-image pixel coordinates
  Eigen::MatrixX2d weights;   // N x 2, one column per output coordinate
  Eigen::Matrix<double, 3, 2> affine;
  double fit_residual = 0.0;  // max |f(c_i) - target_i| over controls and coordinates
  double condition_estimate = 1.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(controls.rows()); }

  Eigen::Vector2d operator()(double x, double y) const {
    double u = affine(0, 0) + affine(1, 0) * x + affine(2, 0) * y;
    double v = affine(0, 1) + affine(1, 1) * x + affine(2, 1) * y;
    const Eigen::Index n = controls.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dx = x - controls(i, 0);
      const double dy = y - controls(i, 1);
      const double d = std::sqrt(dx * dx + dy * dy);
      u += weights(i, 0) * d;
      v += weights(i, 1) * d;
    }
    return {u, v};
  }

  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const { return (*this)(x.x(), x.y()); }
};

inline constexpr double kCollinearityTolerance = 1e-10;
inline constexpr double kMinReciprocalCondition = 1e-15;

inline Eigen::MatrixX2d eval_spline(const SplineWarp& warp,
                                    const Eigen::Ref<const Eigen::MatrixX2d>& queries) {
  Eigen::MatrixX2d out(queries.rows(), 2);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    out.row(q) = warp(queries(q, 0), queries(q, 1)).transpose();
  }
  return out;
}

// Solves the augmented system
//
//   [ K + lambda*I  P ] [w]   [y]
//   [ P^T           0 ] [v] = [0],   K_ij = |c_i - c_j|,  P_i = [1, c_i^T]
//
// in centered, scaled coordinates and maps the coefficients back, which keeps
// the system well conditioned for pixel-scale inputs.
inline SplineWarp fit_spline(const Eigen::Ref<const Eigen::MatrixX2d>& controls,
                             const Eigen::Ref<const Eigen::MatrixX2d>& targets,
                             double lambda = 0.0) {
  const Eigen::Index n = controls.rows();
  if (targets.rows() != n) {
    throw ShapeError("spline fit: " + std::to_string(n) + " controls but " +
                     std::to_string(targets.rows()) + " targets");
  }
  if (n < 3) {
    throw InsufficientControlsError("spline fit needs at least 3 control points, got " +
                                    std::to_string(n));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("spline regularization must be finite and >= 0");
  }
  if (!controls.allFinite() || !targets.allFinite()) {
    throw ParameterError("spline fit inputs must be finite");
  }

  const Eigen::RowVector2d mean = controls.colwise().mean();
  const Eigen::MatrixX2d centered = controls.rowwise() - mean;
  const double scale = centered.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw DegenerateGeometryError("all control points coincide");
  const Eigen::MatrixX2d c = centered / scale;

  Eigen::MatrixXd poly(n, 3);
  poly.col(0).setOnes();
  poly.rightCols<2>() = c;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(poly);
  const auto& sv = svd.singularValues();
  if (sv(2) <= kCollinearityTolerance * sv(0)) {
    throw DegenerateGeometryError("control points are collinear (singular value ratio " +
                                  std::to_string(sv(2) / sv(0)) + ")");
  }

  const Eigen::Index m = n + 3;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (c.row(i) - c.row(j)).norm();
      A(i, j) = d;
      A(j, i) = d;
    }
    A(i, i) = lambda / scale;
  }
  A.topRightCorner(n, 3) = poly;
  A.bottomLeftCorner(3, n) = poly.transpose();

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 2);
  rhs.topRows(n) = targets;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rcond = lu.rcond();
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(rcond >= kMinReciprocalCondition)) {
    throw NumericalError("spline system is numerically singular (condition estimate " +
                             std::to_string(condition) + "); duplicate control points?",
                         condition);
  }
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw NumericalError("spline solve produced non-finite values", condition);

  SplineWarp warp;
  warp.controls = controls;
  warp.weights = sol.topRows(n) / scale;
  const Eigen::Matrix<double, 3, 2> v = sol.bottomRows(3);
  warp.affine.row(1) = v.row(1) / scale;
  warp.affine.row(2) = v.row(2) / scale;
  warp.affine.row(0) = v.row(0) - mean(0) * warp.affine.row(1) - mean(1) * warp.affine.row(2);
  warp.condition_estimate = condition;

  double residual = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d f = warp(controls(i, 0), controls(i, 1));
    residual = std::max(residual, (f - targets.row(i).transpose()).cwiseAbs().maxCoeff());
  }
  warp.fit_residual = residual;
  return warp;
}

inline SplineWarp fit_spline(const CorrespondenceSet& controls, double lambda = 0.0) {
  return fit_spline(controls.range_points(), controls.rgb_points(), lambda);
}

// Text dump: "controls N", then N lines "cx cy wx wy", then the three rows of V.
inline void dump_spline(std::ostream& os, const SplineWarp& warp) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "controls " << warp.size() << '\n';
  for (Eigen::Index i = 0; i < warp.controls.rows(); ++i) {
    os << warp.controls(i, 0) << ' ' << warp.controls(i, 1) << ' ' << warp.weights(i, 0) << ' '
       << warp.weights(i, 1) << '\n';
  }
  os << "affine\n";
  for (int r = 0; r < 3; ++r) os << warp.affine(r, 0) << ' ' << warp.affine(r, 1) << '\n';
  os << "fit_residual " << warp.fit_residual << '\n';
  os.precision(old);
}

}  // namespace rangefuse
