#include "evdeblur/trajectory.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "evdeblur/rng.hpp"

namespace evdeblur {

CumulativeBasis cumulative_basis(double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  CumulativeBasis basis;
  basis.b[0] = 1.0;
  basis.b[1] = (5.0 + 3.0 * u - 3.0 * u2 + u3) / 6.0;
  basis.b[2] = (1.0 + 3.0 * u + 3.0 * u2 - 2.0 * u3) / 6.0;
  basis.b[3] = u3 / 6.0;
  return basis;
}

SplineTrajectory::SplineTrajectory(std::vector<RigidTransform> knots, double t0, double dt)
    : knots_(std::move(knots)), t0_(t0), dt_(dt) {
  if (knots_.size() < 4) throw ValidationError("spline needs at least 4 knots, got " + std::to_string(knots_.size()));
  if (!(dt_ > 0.0)) throw ValidationError("knot spacing must be positive");
}

KnotLocation knot_index(double t, double t0, double dt, std::size_t knot_count) {
  const double x = (t - t0) / dt;
  const double segments = static_cast<double>(knot_count - 3);
  if (!(x >= 0.0 && x <= segments)) {
    throw OutOfDomain("time " + std::to_string(t) + " outside [" + std::to_string(t0) + ", " +
                      std::to_string(t0 + segments * dt) + "]");
  }
  KnotLocation loc;
  loc.k = static_cast<int>(std::floor(x));
  loc.u = x - loc.k;
  if (loc.k == static_cast<int>(knot_count) - 3) {
    // end of the domain: closure of the last segment
    loc.k -= 1;
    loc.u = 1.0;
  }
  return loc;
}

KnotLocation knot_index(double t, const SplineTrajectory& traj) {
  return knot_index(t, traj.t0(), traj.dt(), traj.knots().size());
}

RigidTransform pose_at(double t, const SplineTrajectory& traj) {
  const KnotLocation loc = knot_index(t, traj);
  const CumulativeBasis basis = cumulative_basis(loc.u);
  const auto& knots = traj.knots();
  RigidTransform pose = knots[loc.k];
  for (int j = 0; j < 3; ++j) {
    const Twist omega = se3_log(compose(inverse(knots[loc.k + j]), knots[loc.k + j + 1]));
    pose = compose(pose, se3_exp(Twist(omega.omega * basis.b[j + 1], omega.v * basis.b[j + 1])));
  }
  return pose;
}

RigidTransform pose_at_linear(double s, const RigidTransform& start, const RigidTransform& end) {
  if (!(s >= 0.0 && s <= 1.0)) throw OutOfDomain("interpolation parameter " + std::to_string(s));
  const Twist delta = se3_log(compose(inverse(start), end));
  return compose(start, se3_exp(Twist(delta.omega * s, delta.v * s)));
}

SplineTrajectory init_knots(int count, double magnitude, std::uint64_t rng_seed) {
  if (count < 4) throw ValidationError("init_knots: count must be >= 4");
  if (!(magnitude > 0.0)) throw ValidationError("init_knots: magnitude must be positive");
  Rng rng(rng_seed);
  std::vector<RigidTransform> knots;
  for (int i = 0; i < count; ++i) {
    Vector6d xi;
    for (int j = 0; j < 6; ++j) xi[j] = rng.uniform(0.0, magnitude);
    knots.push_back(se3_exp(Twist(xi)));
  }
  return SplineTrajectory(std::move(knots), 0.0, 1.0 / static_cast<double>(count - 3));
}

std::string to_string(TrajectoryKind kind) { return kind == TrajectoryKind::kSpline ? "spline" : "linear"; }

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "spline") return TrajectoryKind::kSpline;
  if (s == "linear") return TrajectoryKind::kLinear;
  throw ConfigError("unknown trajectory representation '" + s + "' (expected spline|linear)");
}

void Trajectory::validate() const {
  if (kind == TrajectoryKind::kSpline && knot_twists.size() < 4) {
    throw ValidationError("spline trajectory needs >= 4 knots");
  }
  if (kind == TrajectoryKind::kLinear && knot_twists.size() != 2) {
    throw ValidationError("linear trajectory needs exactly 2 knots");
  }
}

std::vector<RigidTransform> Trajectory::knots() const {
  std::vector<RigidTransform> out;
  out.reserve(knot_twists.size());
  for (const auto& xi : knot_twists) out.push_back(se3_exp(Twist(xi)));
  return out;
}

SplineTrajectory Trajectory::spline() const {
  if (kind != TrajectoryKind::kSpline) throw ValidationError("trajectory is not a spline");
  return SplineTrajectory(knots(), 0.0, knot_spacing());
}

RigidTransform Trajectory::pose_at(double t) const {
  validate();
  std::vector<lie::TwistOf<double>> twists;
  for (const auto& xi : knot_twists) twists.push_back({{xi[0], xi[1], xi[2]}, {xi[3], xi[4], xi[5]}});
  return from_pose(TrajectoryEvaluator<double>(kind, twists).at(t));
}

Trajectory Trajectory::from_knots(TrajectoryKind kind, const std::vector<RigidTransform>& knots) {
  Trajectory traj;
  traj.kind = kind;
  for (const auto& k : knots) traj.knot_twists.push_back(se3_log(k).vector());
  traj.validate();
  return traj;
}

Trajectory Trajectory::random_init(TrajectoryKind kind, int count, double magnitude, std::uint64_t seed) {
  if (kind == TrajectoryKind::kLinear) count = 2;
  if (count < 2) throw ValidationError("random_init: count too small");
  Rng rng(seed);
  Trajectory traj;
  traj.kind = kind;
  for (int i = 0; i < count; ++i) {
    Vector6d xi;
    for (int j = 0; j < 6; ++j) xi[j] = rng.uniform(0.0, magnitude);
    traj.knot_twists.push_back(xi);
  }
  traj.validate();
  return traj;
}

void export_trajectory(const std::filesystem::path& path, std::span<const double> times,
                       std::span<const RigidTransform> poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& p = poses[i];
    const Eigen::Vector4d q = to_quaternion_xyzw(p.rotation);
    out << times[i] << ' ' << p.translation.x() << ' ' << p.translation.y() << ' ' << p.translation.z() << ' ' << q[0]
        << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void export_trajectory(const std::filesystem::path& path, const Trajectory& traj, std::span<const double> times) {
  std::vector<RigidTransform> poses;
  poses.reserve(times.size());
  for (double t : times) poses.push_back(traj.pose_at(t));
  export_trajectory(path, times, poses);
}

std::vector<std::pair<double, RigidTransform>> read_trajectory_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::pair<double, RigidTransform>> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t;
    Eigen::Vector3d p;
    Eigen::Vector4d q;
    if (!(ls >> t >> p.x() >> p.y() >> p.z() >> q[0] >> q[1] >> q[2] >> q[3])) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 't tx ty tz qx qy qz qw'");
    }
    RigidTransform T;
    T.rotation = from_quaternion_xyzw(q);
    T.translation = p;
    samples.emplace_back(t, T);
  }
  return samples;
}

}  // namespace evdeblur
