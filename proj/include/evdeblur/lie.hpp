#pragma once

#include <Eigen/Core>

#include "evdeblur/lie_generic.hpp"

namespace evdeblur {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Rigid-body transform (camera-to-world for trajectory poses).
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform translate(double x, double y, double z) {
    RigidTransform t;
    t.translation = {x, y, z};
    return t;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;

  /// Largest deviation of rotationᵀ·rotation from I, and of det from +1.
  double orthonormality_error() const;
};

/// se(3) element: rotation part first, then translation part.
struct Twist {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& w, const Eigen::Vector3d& vel) : omega(w), v(vel) {}
  explicit Twist(const Vector6d& xi) : omega(xi.head<3>()), v(xi.tail<3>()) {}
  Vector6d vector() const;
};

RigidTransform se3_exp(const Twist& xi);

/// Throws AngleNearPi when the rotation angle is within 1e-6 of π.
Twist se3_log(const RigidTransform& T);

/// Products re-orthonormalize (polar projection) only when drift exceeds 1e-9.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& a);

/// Nearest rotation in the Frobenius sense (polar projection via SVD).
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

/// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

// Conversions to and from the generic representation.
lie::Pose<double> to_pose(const RigidTransform& T);
RigidTransform from_pose(const lie::Pose<double>& p);

/// Unit quaternion (x, y, z, w) with w ≥ 0.
Eigen::Vector4d to_quaternion_xyzw(const Eigen::Matrix3d& R);
Eigen::Matrix3d from_quaternion_xyzw(const Eigen::Vector4d& q);

}  // namespace evdeblur
