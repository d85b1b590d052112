#pragma once

// SE(3) exponential / logarithm written once over a generic scalar type.
// The same code runs on plain doubles and on autodiff variables, so the
// trajectory gradients are exact derivatives of the value path.
//
// A scalar type T must provide (found by ADL or via the std:: fallbacks):
//   sin, cos, sqrt, atan2, arithmetic with T and double, and
//   value_of(T) -> double for branch decisions.

#include <array>
#include <cmath>
#include <numbers>

#include "evdeblur/errors.hpp"

namespace evdeblur::lie {

inline double value_of(double x) { return x; }
inline double value_of(float x) { return x; }

// `threshold`: below this rotation angle the sqrt/atan2 closed forms are
// replaced by series (the closed forms are singular at zero).
// `series`: the coefficients (θ - sin θ)/θ³ and (1 - θ sin θ/(2(1 - cos θ)))/θ²
// cancel catastrophically long before that, so they switch to their quartic
// series below this wider angle, where truncation is still below precision.
template <typename T>
struct SmallAngle {
  static constexpr double threshold = 1e-8;
  static constexpr double series = 1e-2;
};
template <>
struct SmallAngle<float> {
  static constexpr double threshold = 0.1;
  static constexpr double series = 0.3;
};

// Angles within this distance of π make the logarithm non-unique.
inline constexpr double kNearPiTolerance = 1e-6;

template <typename T>
using Vec3 = std::array<T, 3>;
template <typename T>
using Mat3 = std::array<T, 9>;  // row-major

template <typename T>
struct Pose {
  Mat3<T> R;
  Vec3<T> t;
};

template <typename T>
struct TwistOf {
  Vec3<T> omega;
  Vec3<T> v;
};

namespace detail {

template <typename T>
Mat3<T> identity_like(const T& zero) {
  T one = zero + 1.0;
  return {one, zero, zero, zero, one, zero, zero, zero, one};
}

template <typename T>
Mat3<T> matmul(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      c[3 * i + j] = a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j];
  return c;
}

template <typename T>
Vec3<T> matvec(const Mat3<T>& a, const Vec3<T>& x) {
  Vec3<T> y;
  for (int i = 0; i < 3; ++i) y[i] = a[3 * i] * x[0] + a[3 * i + 1] * x[1] + a[3 * i + 2] * x[2];
  return y;
}

template <typename T>
Mat3<T> transpose(const Mat3<T>& a) {
  return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

template <typename T>
Mat3<T> hat(const Vec3<T>& w, const T& zero) {
  return {zero, -w[2], w[1], w[2], zero, -w[0], -w[1], w[0], zero};
}

// I + a·W + b·W², with W = hat(w); W² expanded so no redundant products.
template <typename T>
Mat3<T> rodrigues_like(const Vec3<T>& w, const T& a, const T& b) {
  const T xx = w[0] * w[0], yy = w[1] * w[1], zz = w[2] * w[2];
  const T xy = w[0] * w[1], xz = w[0] * w[2], yz = w[1] * w[2];
  Mat3<T> m;
  m[0] = 1.0 - b * (yy + zz);
  m[1] = b * xy - a * w[2];
  m[2] = b * xz + a * w[1];
  m[3] = b * xy + a * w[2];
  m[4] = 1.0 - b * (xx + zz);
  m[5] = b * yz - a * w[0];
  m[6] = b * xz - a * w[1];
  m[7] = b * yz + a * w[0];
  m[8] = 1.0 - b * (xx + yy);
  return m;
}

}  // namespace detail

template <typename T>
Pose<T> compose(const Pose<T>& a, const Pose<T>& b) {
  Pose<T> c;
  c.R = detail::matmul(a.R, b.R);
  Vec3<T> rb = detail::matvec(a.R, b.t);
  for (int i = 0; i < 3; ++i) c.t[i] = rb[i] + a.t[i];
  return c;
}

template <typename T>
Pose<T> inverse(const Pose<T>& a) {
  Pose<T> c;
  c.R = detail::transpose(a.R);
  Vec3<T> rt = detail::matvec(c.R, a.t);
  for (int i = 0; i < 3; ++i) c.t[i] = -rt[i];
  return c;
}

template <typename T, typename Threshold = SmallAngle<T>>
Pose<T> exp(const TwistOf<T>& xi) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Vec3<T>& w = xi.omega;
  const T theta_sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
  const double thr = Threshold::threshold;
  T a, b, c;
  if (value_of(theta_sq) < thr * thr) {
    const T t4 = theta_sq * theta_sq;
    a = 1.0 - theta_sq * (1.0 / 6.0) + t4 * (1.0 / 120.0);
    b = 0.5 - theta_sq * (1.0 / 24.0) + t4 * (1.0 / 720.0);
    c = (1.0 / 6.0) - theta_sq * (1.0 / 120.0) + t4 * (1.0 / 5040.0);
  } else {
    const T theta = sqrt(theta_sq);
    const T s = sin(theta);
    const T half = sin(theta * 0.5);
    a = s / theta;
    b = 2.0 * half * half / theta_sq;
    if (value_of(theta_sq) < Threshold::series * Threshold::series) {
      c = (1.0 / 6.0) - theta_sq * (1.0 / 120.0) + theta_sq * theta_sq * (1.0 / 5040.0);
    } else {
      c = (theta - s) / (theta_sq * theta);
    }
  }
  Pose<T> out;
  out.R = detail::rodrigues_like(w, a, b);
  const Mat3<T> V = detail::rodrigues_like(w, b, c);
  out.t = detail::matvec(V, xi.v);
  return out;
}

template <typename T, typename Threshold = SmallAngle<T>>
TwistOf<T> log(const Pose<T>& p) {
  using std::atan2;
  using std::sqrt;
  const Mat3<T>& R = p.R;
  const T cos_theta = (R[0] + R[4] + R[8] - 1.0) * 0.5;
  const Vec3<T> w = {(R[7] - R[5]) * 0.5, (R[2] - R[6]) * 0.5, (R[3] - R[1]) * 0.5};
  const T sin_sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
  const double thr = Threshold::threshold;

  TwistOf<T> out;
  T d;  // coefficient of hat(omega)² in the inverse left Jacobian
  if (value_of(sin_sq) < thr * thr && value_of(cos_theta) > 0.0) {
    // θ/sin θ ≈ 1 + θ²/6 and θ² ≈ sin²θ to the order kept here.
    const T scale = 1.0 + sin_sq * (1.0 / 6.0);
    for (int i = 0; i < 3; ++i) out.omega[i] = w[i] * scale;
    const T th2 = sin_sq * scale * scale;
    d = (1.0 / 12.0) + th2 * (1.0 / 720.0) + th2 * th2 * (1.0 / 30240.0);
  } else {
    const T s = sqrt(sin_sq);
    const T theta = atan2(s, cos_theta);
    if (std::numbers::pi - value_of(theta) < kNearPiTolerance) {
      throw AngleNearPi("rotation angle " + std::to_string(value_of(theta)) +
                        " rad is within 1e-6 of pi; logarithm is not unique");
    }
    const T scale = theta / s;
    for (int i = 0; i < 3; ++i) out.omega[i] = w[i] * scale;
    const T th2 = theta * theta;
    if (value_of(th2) < Threshold::series * Threshold::series) {
      d = (1.0 / 12.0) + th2 * (1.0 / 720.0) + th2 * th2 * (1.0 / 30240.0);
    } else {
      d = (1.0 - theta * s / (2.0 * (1.0 - cos_theta))) / th2;
    }
  }
  const T zero = out.omega[0] * 0.0;
  const Mat3<T> Vinv = detail::rodrigues_like(out.omega, zero - 0.5, d);
  out.v = detail::matvec(Vinv, p.t);
  return out;
}

// exp(s·log(a⁻¹·b)) applied on the right of a: the geodesic from a to b.
template <typename T, typename S>
Pose<T> interpolate(const Pose<T>& a, const Pose<T>& b, const S& s) {
  TwistOf<T> delta = log(compose(inverse(a), b));
  for (int i = 0; i < 3; ++i) {
    delta.omega[i] = delta.omega[i] * s;
    delta.v[i] = delta.v[i] * s;
  }
  return compose(a, exp(delta));
}

}  // namespace evdeblur::lie
