#pragma once

#include <Eigen/Core>

#include "rangefuse/error.hpp"

namespace rangefuse {

using Matrix34 = Eigen::Matrix<double, 3, 4>;
using Matrix44 = Eigen::Matrix<double, 4, 4>;

// Embeds a 3x3 or 3x4 block into homogeneous 4x4 form.
inline Matrix44 pad_homogeneous(const Eigen::Matrix3d& m) {
  Matrix44 out = Matrix44::Identity();
  out.topLeftCorner<3, 3>() = m;
  return out;
}

inline Matrix44 pad_homogeneous(const Matrix34& m) {
  Matrix44 out = Matrix44::Identity();
  out.topRows<3>() = m;
  return out;
}

inline Matrix34 compose_projection(const Matrix34& intrinsics_projective,
                                   const Eigen::Matrix3d& rectifying_rotation,
                                   const Matrix34& lidar_to_camera) {
  return intrinsics_projective * pad_homogeneous(rectifying_rotation) *
         pad_homogeneous(lidar_to_camera);
}

// Camera/LiDAR calibration. The composed 3x4 projection maps homogeneous
// LiDAR coordinates to homogeneous RGB pixel coordinates.
class CalibrationSet {
 public:
  static constexpr double kOrthonormalTolerance = 1e-6;

  CalibrationSet()
      : CalibrationSet(Matrix34::Identity(), Eigen::Matrix3d::Identity(), Matrix34::Identity()) {}

  CalibrationSet(const Matrix34& intrinsics_projective, const Eigen::Matrix3d& rectifying_rotation,
                 const Matrix34& lidar_to_camera)
      : intrinsics_(intrinsics_projective),
        rectifying_(rectifying_rotation),
        lidar_to_camera_(lidar_to_camera),
        composed_(compose_projection(intrinsics_projective, rectifying_rotation, lidar_to_camera)) {
    const Eigen::Matrix3d r = lidar_to_camera.leftCols<3>();
    const double dev = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(dev <= kOrthonormalTolerance)) {
      throw ParameterError("lidar_to_camera rotation is not orthonormal (deviation " +
                           std::to_string(dev) + ")");
    }
  }

  const Matrix34& camera_intrinsics_projective() const noexcept { return intrinsics_; }
  const Eigen::Matrix3d& rectifying_rotation() const noexcept { return rectifying_; }
  const Matrix34& lidar_to_camera() const noexcept { return lidar_to_camera_; }
  const Matrix34& composed_projection() const noexcept { return composed_; }

 private:
  Matrix34 intrinsics_;
  Eigen::Matrix3d rectifying_;
  Matrix34 lidar_to_camera_;
  Matrix34 composed_;
};

}  // namespace rangefuse
