#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "evdeblur/camera.hpp"
#include "evdeblur/events.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/io.hpp"
#include "evdeblur/scene.hpp"
#include "evdeblur/trajectory.hpp"

namespace evdeblur {

/// Ground-truth camera motion across the exposure. The spline passes close to
/// the identity at mid-exposure; `rotation_deg` and `translation` set the
/// start-to-end motion, `nonlinearity` bends the path (a quadratic term of the
/// same magnitude scale).
struct MotionParams {
  double rotation_deg = 4.0;
  double translation = 0.15;
  double nonlinearity = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
};

Trajectory make_gt_trajectory(const MotionParams& motion);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

Image render_scene(const GroundTruthScene& scene, const RigidTransform& pose, const CameraIntrinsics& K);

/// log(luminance + eps) per pixel, row-major.
std::vector<double> log_gray(const GroundTruthScene& scene, const RigidTransform& pose, const CameraIntrinsics& K,
                             double eps_log);

/// Reference-level trigger model over `frames` uniform renders on [0, 1],
/// with linearly interpolated timestamps. Output sorted by time.
EventStream simulate_events(const GroundTruthScene& scene, const Trajectory& traj, const CameraIntrinsics& K,
                            int frames, double C, double eps_log, int threads = 1);

/// Same trigger model applied to precomputed log frames (row-major per frame)
/// at the given times.
EventStream events_from_log_frames(const std::vector<std::vector<double>>& log_frames,
                                   const std::vector<double>& times, int width, int height, double C);

struct BlurSimulation {
  Image blurry;
  std::vector<Image> sharp;
  std::vector<double> times;
};

BlurSimulation simulate_blur(const GroundTruthScene& scene, const Trajectory& traj, const CameraIntrinsics& K,
                             int n_gt, int threads = 1);

struct SimulationConfig {
  SceneParams scene;
  MotionParams motion;
  CameraIntrinsics intrinsics;
  int frames = 200;
  int n_gt = 200;
  double contrast = 0.2;
  double eps_log = 1e-5;
  double near = 2.0;
  double far = 6.0;
  double exposure = 0.05;  // seconds, informational
  std::vector<double> reference_times{0.0, 0.25, 0.5, 0.75, 1.0};
  int trajectory_samples = 101;
  std::uint64_t seed = 1;

  void validate() const;
};

Json to_json(const SimulationConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
SimulationConfig simulation_config_from_json(const Json& j);
SimulationConfig read_simulation_config(const std::filesystem::path& path);

struct DatasetSummary {
  std::size_t event_count = 0;
  double blur_psnr_vs_mid = 0.0;
};

/// Writes a complete dataset directory (see docs/formats.md).
DatasetSummary make_dataset(const SimulationConfig& config, const std::filesystem::path& out_dir, int threads = 1);

}  // namespace evdeblur
