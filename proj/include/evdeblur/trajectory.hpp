#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evdeblur/lie.hpp"

namespace evdeblur {

/// Weights multiplying the incremental twists of a cumulative cubic B-spline.
/// b[0] is always 1.
struct CumulativeBasis {
  std::array<double, 4> b{};
};

CumulativeBasis cumulative_basis(double u);

struct KnotLocation {
  int k = 0;
  double u = 0.0;
};

/// Uniform cumulative cubic B-spline on SE(3).
class SplineTrajectory {
 public:
  SplineTrajectory(std::vector<RigidTransform> knots, double t0, double dt);

  const std::vector<RigidTransform>& knots() const { return knots_; }
  double t0() const { return t0_; }
  double dt() const { return dt_; }
  /// Queryable domain is [t0, domain_end()], the end point included as the
  /// u = 1 closure of the last segment.
  double domain_end() const { return t0_ + static_cast<double>(knots_.size() - 3) * dt_; }

 private:
  std::vector<RigidTransform> knots_;
  double t0_;
  double dt_;
};

/// Segment index and local parameter for time t. Throws OutOfDomain.
KnotLocation knot_index(double t, const SplineTrajectory& traj);
KnotLocation knot_index(double t, double t0, double dt, std::size_t knot_count);

RigidTransform pose_at(double t, const SplineTrajectory& traj);

/// Geodesic interpolation start·exp(s·log(start⁻¹·end)), s ∈ [0, 1].
RigidTransform pose_at_linear(double s, const RigidTransform& start, const RigidTransform& end);

/// Knots exp(ξ) with every twist coordinate uniform in (0, magnitude). The
/// spline spans normalized exposure time [0, 1].
SplineTrajectory init_knots(int count, double magnitude, std::uint64_t rng_seed);

enum class TrajectoryKind { kSpline, kLinear };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

/// Optimizable trajectory over normalized exposure time [0, 1]: a list of
/// knot twists and the interpolation scheme. Splines need ≥ 4 knots, the
/// linear scheme exactly 2 (start and end pose).
struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::kSpline;
  std::vector<Vector6d> knot_twists;

  std::size_t parameter_count() const { return 6 * knot_twists.size(); }
  /// Spline knot spacing so the queryable domain is exactly [0, 1].
  double knot_spacing() const { return 1.0 / static_cast<double>(knot_twists.size() - 3); }

  RigidTransform pose_at(double t) const;
  std::vector<RigidTransform> knots() const;
  SplineTrajectory spline() const;

  static Trajectory from_knots(TrajectoryKind kind, const std::vector<RigidTransform>& knots);
  static Trajectory random_init(TrajectoryKind kind, int count, double magnitude, std::uint64_t seed);
  void validate() const;
};

/// Writes `t tx ty tz qx qy qz qw` per line for each requested time.
void export_trajectory(const std::filesystem::path& path, const Trajectory& traj, std::span<const double> times);
void export_trajectory(const std::filesystem::path& path, std::span<const double> times,
                       std::span<const RigidTransform> poses);

/// Reads the text format written by export_trajectory.
std::vector<std::pair<double, RigidTransform>> read_trajectory_samples(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Generic evaluation, shared by the double API and the autodiff tape.

template <typename T>
class TrajectoryEvaluator {
 public:
  TrajectoryEvaluator(TrajectoryKind kind, std::span<const lie::TwistOf<T>> twists) : kind_(kind) {
    knots_.reserve(twists.size());
    for (const auto& xi : twists) knots_.push_back(lie::exp(xi));
    if (kind_ == TrajectoryKind::kSpline) {
      dt_ = 1.0 / static_cast<double>(knots_.size() - 3);
      for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
        increments_.push_back(lie::log(lie::compose(lie::inverse(knots_[i]), knots_[i + 1])));
      }
    } else {
      increment_ = lie::log(lie::compose(lie::inverse(knots_[0]), knots_[1]));
    }
  }

  /// Pose at normalized time t ∈ [0, 1].
  lie::Pose<T> at(double t) const {
    if (kind_ == TrajectoryKind::kLinear) {
      if (!(t >= 0.0 && t <= 1.0)) throw OutOfDomain("linear trajectory time " + std::to_string(t));
      lie::TwistOf<T> d = increment_;
      for (int i = 0; i < 3; ++i) {
        d.omega[i] = d.omega[i] * t;
        d.v[i] = d.v[i] * t;
      }
      return lie::compose(knots_[0], lie::exp(d));
    }
    const KnotLocation loc = knot_index(t, 0.0, dt_, knots_.size());
    const CumulativeBasis basis = cumulative_basis(loc.u);
    lie::Pose<T> pose = knots_[loc.k];
    for (int j = 0; j < 3; ++j) {
      lie::TwistOf<T> scaled = increments_[loc.k + j];
      for (int i = 0; i < 3; ++i) {
        scaled.omega[i] = scaled.omega[i] * basis.b[j + 1];
        scaled.v[i] = scaled.v[i] * basis.b[j + 1];
      }
      pose = lie::compose(pose, lie::exp(scaled));
    }
    return pose;
  }

 private:
  TrajectoryKind kind_;
  double dt_ = 1.0;
  std::vector<lie::Pose<T>> knots_;
  std::vector<lie::TwistOf<T>> increments_;
  lie::TwistOf<T> increment_;
};

}  // namespace evdeblur
