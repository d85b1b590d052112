#pragma once

#include <Eigen/Core>

#include "evdeblur/lie.hpp"

namespace evdeblur {

/// Pinhole intrinsics. The camera looks down +z and pixel (x, y) has its
/// center at (x + 0.5, y + 0.5).
struct CameraIntrinsics {
  double fx = 48.0;
  double fy = 48.0;
  double cx = 32.0;
  double cy = 32.0;
  int width = 64;
  int height = 64;

  void validate() const;
  /// Unit direction in the camera frame through the given pixel.
  Eigen::Vector3d camera_direction(double px, double py) const;
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d dir = Eigen::Vector3d::UnitZ();
};

Ray make_ray(double px, double py, const RigidTransform& pose, const CameraIntrinsics& K);

}  // namespace evdeblur
