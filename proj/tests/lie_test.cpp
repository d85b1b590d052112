#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "evdeblur/lie.hpp"
#include "evdeblur/rng.hpp"

namespace evdeblur {
namespace {

Twist random_twist(Rng& rng, double max_angle) {
  Eigen::Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  axis.normalize();
  const double angle = rng.uniform(0.0, max_angle);
  return Twist(axis * angle, Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)));
}

TEST(Se3Exp, ZeroTwistIsIdentity) {
  const RigidTransform T = se3_exp(Twist());
  EXPECT_TRUE(T.rotation.isIdentity(0.0));
  EXPECT_TRUE(T.translation.isZero(0.0));
}

TEST(Se3Exp, QuarterTurnAboutZ) {
  const RigidTransform T = se3_exp(Twist(Eigen::Vector3d(0, 0, std::numbers::pi / 2), Eigen::Vector3d::Zero()));
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((T.rotation - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(T.translation.norm(), 1e-15);
}

TEST(Se3Exp, PureTranslation) {
  const RigidTransform T = se3_exp(Twist(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 2, 3)));
  EXPECT_TRUE(T.rotation.isIdentity(0.0));
  EXPECT_EQ(T.translation, Eigen::Vector3d(1, 2, 3));
}

TEST(Se3Exp, MatchesRodriguesOracle) {
  // Independent check: R = cos θ I + sin θ [a]x + (1 - cos θ) a aᵀ.
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Twist xi = random_twist(rng, 3.0);
    const double theta = xi.omega.norm();
    const Eigen::Vector3d a = xi.omega / theta;
    Eigen::Matrix3d ax;
    ax << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    const Eigen::Matrix3d R = std::cos(theta) * Eigen::Matrix3d::Identity() + std::sin(theta) * ax +
                              (1 - std::cos(theta)) * a * a.transpose();
    EXPECT_LT((se3_exp(xi).rotation - R).cwiseAbs().maxCoeff(), 1e-13);
  }
}

struct ForceSeries {
  static constexpr double threshold = 1.0;
  static constexpr double series = 1.0;
};
struct ForceClosedForm {
  static constexpr double threshold = 0.0;
  static constexpr double series = 0.0;
};

TEST(Se3Exp, SeriesAndClosedFormAgreeNearSwitch) {
  // Evaluate the same twist through both branches.
  for (double angle : {1e-8, 1e-5, 1e-2}) {
    const lie::TwistOf<double> xi{{angle * 0.6, -angle * 0.8, 0.0}, {0.3, 0.1, -0.7}};
    const auto s = lie::exp<double, ForceSeries>(xi);
    const auto c = lie::exp<double, ForceClosedForm>(xi);
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(s.R[i], c.R[i], 1e-15) << angle;
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.t[i], c.t[i], 1e-15) << angle;
    if (angle > 1e-5) continue;  // the log's leading series is only second order
    const auto ls = lie::log<double, ForceSeries>(c);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(ls.omega[i], xi.omega[i], 1e-15) << angle;
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(ls.v[i], xi.v[i], 1e-14) << angle;
  }
}

TEST(Se3Log, IdentityIsZero) {
  const Twist xi = se3_log(RigidTransform::identity());
  EXPECT_TRUE(xi.vector().isZero(0.0));
}

TEST(Se3Log, PureTranslation) {
  const Twist xi = se3_log(RigidTransform::translate(1, 0, 0));
  Vector6d expected;
  expected << 0, 0, 0, 1, 0, 0;
  EXPECT_EQ(xi.vector(), expected);
}

TEST(Se3Log, RoundTripTenThousandTwists) {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Twist xi = random_twist(rng, 3.0);
    const Twist back = se3_log(se3_exp(xi));
    worst = std::max(worst, (back.vector() - xi.vector()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Se3Log, RoundTripNearZero) {
  Rng rng(3);
  for (double scale : {1e-12, 1e-9, 1e-7, 1e-4}) {
    const Twist xi(Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) * scale,
                   Eigen::Vector3d(0.5, -1.0, 2.0));
    EXPECT_LT((se3_log(se3_exp(xi)).vector() - xi.vector()).cwiseAbs().maxCoeff(), 1e-12) << scale;
  }
}

TEST(Se3Log, AngleNearPiThrows) {
  const Twist xi(Eigen::Vector3d(0, std::numbers::pi - 1e-8, 0), Eigen::Vector3d::Zero());
  EXPECT_THROW(se3_log(se3_exp(xi)), AngleNearPi);
}

TEST(Se3Exp, HomomorphismOnCollinearTwists) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Twist xi = random_twist(rng, 1.0);
    const double a = rng.uniform(-1.5, 1.5);
    const double b = rng.uniform(-1.5, 1.5);
    const RigidTransform lhs = compose(se3_exp(Twist(xi.omega * a, xi.v * a)), se3_exp(Twist(xi.omega * b, xi.v * b)));
    const RigidTransform rhs = se3_exp(Twist(xi.omega * (a + b), xi.v * (a + b)));
    EXPECT_LT((lhs.matrix() - rhs.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se3Exp, ProducesValidRotations) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform T = se3_exp(random_twist(rng, 3.1));
    EXPECT_LT(T.orthonormality_error(), 1e-9);
  }
}

TEST(Compose, InverseGivesIdentity) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform T = se3_exp(random_twist(rng, 3.0));
    const RigidTransform I = compose(T, inverse(T));
    EXPECT_LT((I.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Compose, IdentityIsNeutral) {
  Rng rng(10);
  const RigidTransform T = se3_exp(random_twist(rng, 2.0));
  const RigidTransform C = compose(RigidTransform::identity(), T);
  EXPECT_EQ(C.rotation, T.rotation);
  EXPECT_EQ(C.translation, T.translation);
}

TEST(Compose, TranslationsCommute) {
  const RigidTransform C = compose(RigidTransform::translate(1, 0, 0), RigidTransform::translate(0, 1, 0));
  EXPECT_TRUE(C.rotation.isIdentity(0.0));
  EXPECT_EQ(C.translation, Eigen::Vector3d(1, 1, 0));
}

TEST(Compose, ReprojectsDriftedRotation) {
  RigidTransform a = RigidTransform::identity();
  a.rotation(0, 1) = 1e-6;  // not a rotation any more
  const RigidTransform c = compose(a, RigidTransform::identity());
  EXPECT_LT(c.orthonormality_error(), 1e-12);
}

TEST(Quaternion, RoundTrip) {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform T = se3_exp(random_twist(rng, 3.0));
    const Eigen::Vector4d q = to_quaternion_xyzw(T.rotation);
    EXPECT_GE(q[3], 0.0);
    EXPECT_LT((from_quaternion_xyzw(q) - T.rotation).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace
}  // namespace evdeblur
