#include "evdeblur/lie.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace evdeblur {

namespace {

constexpr double kDriftTolerance = 1e-9;

}  // namespace

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

double RigidTransform::orthonormality_error() const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation.determinant() - 1.0));
}

Vector6d Twist::vector() const {
  Vector6d xi;
  xi << omega, v;
  return xi;
}

lie::Pose<double> to_pose(const RigidTransform& T) {
  lie::Pose<double> p;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) p.R[3 * i + j] = T.rotation(i, j);
    p.t[i] = T.translation(i);
  }
  return p;
}

RigidTransform from_pose(const lie::Pose<double>& p) {
  RigidTransform T;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) T.rotation(i, j) = p.R[3 * i + j];
    T.translation(i) = p.t[i];
  }
  return T;
}

RigidTransform se3_exp(const Twist& xi) {
  lie::TwistOf<double> x{{xi.omega.x(), xi.omega.y(), xi.omega.z()}, {xi.v.x(), xi.v.y(), xi.v.z()}};
  return from_pose(lie::exp(x));
}

Twist se3_log(const RigidTransform& T) {
  const lie::TwistOf<double> x = lie::log(to_pose(T));
  return Twist(Eigen::Vector3d(x.omega[0], x.omega[1], x.omega[2]), Eigen::Vector3d(x.v[0], x.v[1], x.v[2]));
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d& V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) *= -1.0;
  return U * V.transpose();
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform c;
  c.rotation = a.rotation * b.rotation;
  c.translation = a.rotation * b.translation + a.translation;
  if (c.orthonormality_error() > kDriftTolerance) c.rotation = project_to_rotation(c.rotation);
  return c;
}

RigidTransform inverse(const RigidTransform& a) {
  RigidTransform c;
  c.rotation = a.rotation.transpose();
  c.translation = -(c.rotation * a.translation);
  return c;
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d d = a.transpose() * b;
  const Eigen::Vector3d w(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * w.norm(), 0.5 * (d.trace() - 1.0));
}

Eigen::Vector4d to_quaternion_xyzw(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return {q.x(), q.y(), q.z(), q.w()};
}

Eigen::Matrix3d from_quaternion_xyzw(const Eigen::Vector4d& q) {
  Eigen::Quaterniond quat(q[3], q[0], q[1], q[2]);
  return quat.normalized().toRotationMatrix();
}

}  // namespace evdeblur
