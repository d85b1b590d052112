#include "evdeblur/camera.hpp"

#include <string>

namespace evdeblur {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw ValidationError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw ValidationError("principal point (" + std::to_string(cx) + ", " + std::to_string(cy) + ") outside image");
  }
}

Eigen::Vector3d CameraIntrinsics::camera_direction(double px, double py) const {
  return Eigen::Vector3d((px + 0.5 - cx) / fx, (py + 0.5 - cy) / fy, 1.0).normalized();
}

Ray make_ray(double px, double py, const RigidTransform& pose, const CameraIntrinsics& K) {
  Ray ray;
  ray.origin = pose.translation;
  ray.dir = (pose.rotation * K.camera_direction(px, py)).normalized();
  return ray;
}

}  // namespace evdeblur
