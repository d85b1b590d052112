#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "evdeblur/autodiff.hpp"
#include "evdeblur/rng.hpp"
#include "evdeblur/trajectory.hpp"

namespace evdeblur {
namespace {

// Oracle: the published 4×4 matrix times (1, u, u², u³)ᵀ, multiplied out
// explicitly rather than through the closed-form polynomials.
std::array<double, 4> basis_oracle(double u) {
  const double C[4][4] = {{6, 0, 0, 0}, {5, 3, -3, 1}, {1, 3, 3, -2}, {0, 0, 0, 1}};
  const double p[4] = {1, u, u * u, u * u * u};
  std::array<double, 4> b{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) b[i] += C[i][j] * p[j];
    b[i] /= 6.0;
  }
  return b;
}

SplineTrajectory translation_spline(std::vector<double> xs, double t0, double dt) {
  std::vector<RigidTransform> knots;
  for (double x : xs) knots.push_back(RigidTransform::translate(x, 0, 0));
  return SplineTrajectory(knots, t0, dt);
}

RigidTransform random_pose(Rng& rng, double max_rot, double max_trans) {
  Vector6d xi;
  for (int i = 0; i < 3; ++i) xi[i] = rng.uniform(-max_rot, max_rot);
  for (int i = 3; i < 6; ++i) xi[i] = rng.uniform(-max_trans, max_trans);
  return se3_exp(Twist(xi));
}

TEST(KnotIndex, Examples) {
  const auto traj = translation_spline({0, 1, 2, 3}, 0.0, 0.1);
  auto loc = knot_index(0.0, traj);
  EXPECT_EQ(loc.k, 0);
  EXPECT_EQ(loc.u, 0.0);
  loc = knot_index(0.025, traj);
  EXPECT_EQ(loc.k, 0);
  EXPECT_NEAR(loc.u, 0.25, 1e-12);

  const auto traj5 = translation_spline({0, 1, 2, 3, 4}, 1.0, 0.5);
  loc = knot_index(1.75, traj5);
  EXPECT_EQ(loc.k, 1);
  EXPECT_NEAR(loc.u, 0.5, 1e-12);
  EXPECT_LT(loc.k + 3, 5);
}

TEST(KnotIndex, EndOfDomainIsSegmentClosure) {
  const auto traj = translation_spline({0, 1, 2, 3}, 0.0, 1.0);
  const auto loc = knot_index(1.0, traj);
  EXPECT_EQ(loc.k, 0);
  EXPECT_EQ(loc.u, 1.0);
}

TEST(KnotIndex, OutOfDomainThrows) {
  const auto traj = translation_spline({0, 1, 2, 3}, 0.0, 1.0);
  EXPECT_THROW(knot_index(-1e-9, traj), OutOfDomain);
  EXPECT_THROW(knot_index(1.0 + 1e-9, traj), OutOfDomain);
}

TEST(SplineTrajectory, RejectsTooFewKnots) {
  EXPECT_THROW(translation_spline({0, 1, 2}, 0.0, 1.0), ValidationError);
  EXPECT_THROW(translation_spline({0, 1, 2, 3}, 0.0, 0.0), ValidationError);
}

TEST(CumulativeBasis, MatchesMatrixOracle) {
  for (double u : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto b = cumulative_basis(u).b;
    const auto o = basis_oracle(u);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(b[i], o[i], 1e-12) << "u=" << u << " i=" << i;
  }
  const auto b0 = cumulative_basis(0.0).b;
  EXPECT_NEAR(b0[1], 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(b0[2], 1.0 / 6.0, 1e-15);
  EXPECT_EQ(b0[3], 0.0);
  const auto bh = cumulative_basis(0.5).b;
  EXPECT_NEAR(bh[1], 0.9791666666666666, 1e-15);
  EXPECT_NEAR(bh[2], 0.5, 1e-15);
  EXPECT_NEAR(bh[3], 0.0208333333333333, 1e-15);
  const auto b1 = cumulative_basis(1.0).b;
  EXPECT_NEAR(b1[1], 1.0, 1e-15);
  EXPECT_NEAR(b1[2], 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(b1[3], 1.0 / 6.0, 1e-15);
}

TEST(CumulativeBasis, ClosureAndMonotone) {
  for (int i = 0; i < 1000; ++i) {
    const double u = i / 1000.0;
    const auto b = cumulative_basis(u).b;
    EXPECT_EQ(b[0], 1.0);
    EXPECT_GE(b[0], b[1]);
    EXPECT_GE(b[1], b[2]);
    EXPECT_GE(b[2], b[3]);
    EXPECT_GE(b[3], 0.0);
  }
}

TEST(PoseAt, IdentityKnots) {
  const SplineTrajectory traj(std::vector<RigidTransform>(4), 0.0, 1.0);
  for (double t : {0.0, 0.3, 0.99, 1.0}) {
    const auto p = pose_at(t, traj);
    EXPECT_TRUE(p.matrix().isIdentity(1e-15));
  }
}

TEST(PoseAt, ConstantSpline) {
  Rng rng(4);
  const RigidTransform T = random_pose(rng, 1.0, 2.0);
  const SplineTrajectory traj(std::vector<RigidTransform>(4, T), 0.0, 1.0);
  for (double t : {0.0, 0.4, 1.0}) {
    EXPECT_LT((pose_at(t, traj).matrix() - T.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(PoseAt, TranslationKnotsMidpoint) {
  const auto traj = translation_spline({0, 1, 2, 3}, 0.0, 1.0);
  const auto p = pose_at(0.5, traj);
  EXPECT_NEAR(p.translation.x(), 1.5, 1e-12);
  EXPECT_NEAR(p.translation.y(), 0.0, 1e-15);
  EXPECT_TRUE(p.rotation.isIdentity(1e-15));
}

TEST(PoseAt, UniformTranslationsGiveAffinePosition) {
  const double d = 0.7;
  const auto traj = translation_spline({0, d, 2 * d, 3 * d, 4 * d, 5 * d}, 2.0, 0.5);
  for (int i = 0; i <= 60; ++i) {
    const double t = 2.0 + 1.5 * i / 60.0;
    // with equal increments the cumulative weights sum to 1 + u per segment
    const double expected = d * (1.0 + (t - 2.0) / 0.5);
    EXPECT_NEAR(pose_at(t, traj).translation.x(), expected, 1e-9) << t;
  }
}

TEST(PoseAt, ContinuousAcrossSegmentBoundary) {
  Rng rng(8);
  std::vector<RigidTransform> knots;
  for (int i = 0; i < 6; ++i) knots.push_back(random_pose(rng, 0.3, 0.5));
  const SplineTrajectory traj(knots, 0.0, 1.0);
  for (int boundary = 1; boundary <= 2; ++boundary) {
    // u → 1 of segment k from the left, u = 0 of segment k+1 on the right
    const KnotLocation left{boundary - 1, 1.0};
    const auto b = cumulative_basis(left.u).b;
    RigidTransform from_left = knots[left.k];
    for (int j = 0; j < 3; ++j) {
      const Twist om = se3_log(compose(inverse(knots[left.k + j]), knots[left.k + j + 1]));
      from_left = compose(from_left, se3_exp(Twist(om.omega * b[j + 1], om.v * b[j + 1])));
    }
    const RigidTransform from_right = pose_at(static_cast<double>(boundary), traj);
    EXPECT_LT((from_left.translation - from_right.translation).norm(), 1e-9);
    EXPECT_LT((from_left.rotation - from_right.rotation).norm(), 1e-9);
  }
}

TEST(PoseAt, ValidRotations) {
  Rng rng(9);
  std::vector<RigidTransform> knots;
  for (int i = 0; i < 4; ++i) knots.push_back(random_pose(rng, 0.8, 1.0));
  const SplineTrajectory traj(knots, 0.0, 1.0);
  for (int i = 0; i <= 20; ++i) EXPECT_LT(pose_at(i / 20.0, traj).orthonormality_error(), 1e-9);
}

TEST(PoseAt, AdjacentKnotsNearPiPropagate) {
  std::vector<RigidTransform> knots(4);
  knots[2] = se3_exp(Twist(Eigen::Vector3d(std::numbers::pi - 1e-9, 0, 0), Eigen::Vector3d::Zero()));
  const SplineTrajectory traj(knots, 0.0, 1.0);
  EXPECT_THROW(pose_at(0.5, traj), AngleNearPi);
}

TEST(PoseAtLinear, Examples) {
  Rng rng(12);
  const RigidTransform a = random_pose(rng, 0.5, 1.0);
  const RigidTransform b = random_pose(rng, 0.5, 1.0);
  EXPECT_LT((pose_at_linear(0.0, a, b).matrix() - a.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((pose_at_linear(1.0, a, b).matrix() - b.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  const auto q = pose_at_linear(0.25, RigidTransform::identity(), RigidTransform::translate(2, 0, 0));
  EXPECT_NEAR(q.translation.x(), 0.5, 1e-15);
  EXPECT_TRUE(q.rotation.isIdentity(0.0));
  EXPECT_THROW(pose_at_linear(1.5, a, b), OutOfDomain);
}

TEST(InitKnots, DeterministicAndSmall) {
  const auto a = init_knots(4, 0.01, 77);
  const auto b = init_knots(4, 0.01, 77);
  ASSERT_EQ(a.knots().size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a.knots()[i].rotation, b.knots()[i].rotation);
    EXPECT_EQ(a.knots()[i].translation, b.knots()[i].translation);
    const Vector6d xi = se3_log(a.knots()[i]).vector();
    EXPECT_GT(xi.minCoeff(), 0.0);
    EXPECT_LE(xi.maxCoeff(), 0.01 * (1 + 1e-9));
  }
  const auto tiny = init_knots(4, 1e-12, 1);
  for (const auto& k : tiny.knots()) EXPECT_TRUE(k.matrix().isIdentity(1e-11));
  EXPECT_DOUBLE_EQ(a.t0(), 0.0);
  EXPECT_DOUBLE_EQ(a.domain_end(), 1.0);
}

TEST(Trajectory, EvaluatorMatchesSplineOnKnots) {
  Rng rng(13);
  Trajectory traj;
  for (int i = 0; i < 5; ++i) traj.knot_twists.push_back(se3_log(random_pose(rng, 0.3, 0.5)).vector());
  const SplineTrajectory spline = traj.spline();
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    EXPECT_LT((traj.pose_at(t).matrix() - pose_at(t, spline).matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
  traj.kind = TrajectoryKind::kLinear;
  EXPECT_THROW(traj.pose_at(0.5), ValidationError);
  traj.knot_twists.resize(2);
  const auto knots = traj.knots();
  EXPECT_LT((traj.pose_at(0.3).matrix() - pose_at_linear(0.3, knots[0], knots[1]).matrix()).cwiseAbs().maxCoeff(),
            1e-12);
}

// Derivative of pose_at with respect to each knot twist coordinate, via the
// tape, against central differences of the double implementation.
TEST(Trajectory, KnotGradientsMatchFiniteDifferences) {
  Rng rng(21);
  for (int config = 0; config < 5; ++config) {
    Trajectory traj;
    for (int i = 0; i < 4; ++i) traj.knot_twists.push_back(se3_log(random_pose(rng, 0.3, 0.5)).vector());
    const double t = rng.uniform(0.0, 1.0);
    Eigen::Matrix<double, 12, 1> weights;
    for (int i = 0; i < 12; ++i) weights[i] = rng.uniform(-1, 1);
    auto scalar_of = [&](const RigidTransform& p) {
      double acc = 0;
      for (int i = 0; i < 9; ++i) acc += weights[i] * p.rotation(i / 3, i % 3);
      for (int i = 0; i < 3; ++i) acc += weights[9 + i] * p.translation(i);
      return acc;
    };

    ad::Tape<double> tape;
    std::vector<ad::Var<double>> leaves;
    std::vector<lie::TwistOf<ad::Var<double>>> twists;
    for (const auto& xi : traj.knot_twists) {
      lie::TwistOf<ad::Var<double>> tw;
      for (int i = 0; i < 3; ++i) {
        leaves.push_back(tape.variable(xi[i]));
        tw.omega[i] = leaves.back();
      }
      for (int i = 0; i < 3; ++i) {
        leaves.push_back(tape.variable(xi[3 + i]));
        tw.v[i] = leaves.back();
      }
      twists.push_back(tw);
    }
    const auto pose = TrajectoryEvaluator<ad::Var<double>>(TrajectoryKind::kSpline, twists).at(t);
    ad::Var<double> acc = tape.constant(0.0);
    for (int i = 0; i < 9; ++i) acc = acc + pose.R[i] * weights[i];
    for (int i = 0; i < 3; ++i) acc = acc + pose.t[i] * weights[9 + i];
    EXPECT_NEAR(acc.scalar(), scalar_of(traj.pose_at(t)), 1e-12);
    tape.backward(acc);

    const double h = 1e-5;
    for (std::size_t p = 0; p < leaves.size(); ++p) {
      Trajectory plus = traj, minus = traj;
      plus.knot_twists[p / 6][p % 6] += h;
      minus.knot_twists[p / 6][p % 6] -= h;
      const double fd = (scalar_of(plus.pose_at(t)) - scalar_of(minus.pose_at(t))) / (2 * h);
      const double an = tape.grad(leaves[p])(0, 0);
      EXPECT_LT(std::abs(fd - an) / std::max(1.0, std::abs(fd)), 1e-4) << "param " << p;
    }
  }
}

TEST(TrajectoryExport, RoundTrip) {
  Rng rng(30);
  Trajectory traj;
  for (int i = 0; i < 4; ++i) traj.knot_twists.push_back(se3_log(random_pose(rng, 0.3, 0.5)).vector());
  const std::vector<double> times = {0.0, 0.25, 0.5, 1.0};
  const auto path = std::filesystem::temp_directory_path() / "evdeblur_traj_export.txt";
  export_trajectory(path, traj, times);
  const auto samples = read_trajectory_samples(path);
  ASSERT_EQ(samples.size(), times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_EQ(samples[i].first, times[i]);
    const auto expected = traj.pose_at(times[i]);
    EXPECT_LT((samples[i].second.matrix() - expected.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace evdeblur
