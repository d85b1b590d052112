#include "evdeblur/simulator.hpp"

#include <algorithm>
#include <fstream>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "evdeblur/io.hpp"
#include "evdeblur/measurement.hpp"
#include "evdeblur/metrics.hpp"
#include "evdeblur/rng.hpp"
#include "json_util.hpp"

namespace evdeblur {

void MotionParams::validate() const {
  if (!(rotation_deg >= 0.0 && translation >= 0.0 && nonlinearity >= 0.0)) {
    throw ValidationError("motion magnitudes must be >= 0");
  }
}

namespace {

Eigen::Vector3d random_unit(Rng& rng) {
  // normalized Gaussian-free construction: uniform on the sphere via z and angle
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

Trajectory make_gt_trajectory(const MotionParams& motion) {
  motion.validate();
  Rng rng(motion.seed);
  Vector6d d, bend;
  d << random_unit(rng) * (motion.rotation_deg * std::numbers::pi / 180.0), random_unit(rng) * motion.translation;
  bend << random_unit(rng) * (motion.rotation_deg * std::numbers::pi / 180.0),
      random_unit(rng) * motion.translation;
  // Knot j at offset s_j = j − 1.5. With linear knots the spline runs from
  // −d/2 at t = 0 to +d/2 at t = 1; the quadratic term bends the path.
  Trajectory traj;
  traj.kind = TrajectoryKind::kSpline;
  for (int j = 0; j < 4; ++j) {
    const double s = j - 1.5;
    traj.knot_twists.push_back(s * d + motion.nonlinearity * (s * s - 1.25) * bend);
  }
  return traj;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

Image render_scene(const GroundTruthScene& scene, const RigidTransform& pose, const CameraIntrinsics& K) {
  Image img(K.width, K.height, 3);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Eigen::Vector3d c = scene.radiance(make_ray(x, y, pose, K));
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = static_cast<float>(c[ch]);
    }
  }
  return img;
}

std::vector<double> log_gray(const GroundTruthScene& scene, const RigidTransform& pose, const CameraIntrinsics& K,
                             double eps_log) {
  std::vector<double> L(static_cast<std::size_t>(K.width) * K.height);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      L[static_cast<std::size_t>(y) * K.width + x] =
          std::log(luminance(scene.radiance(make_ray(x, y, pose, K))) + eps_log);
    }
  }
  return L;
}

EventStream events_from_log_frames(const std::vector<std::vector<double>>& log_frames,
                                   const std::vector<double>& times, int width, int height, double C) {
  if (!(C > 0.0)) throw ValidationError("contrast threshold must be positive");
  if (log_frames.size() < 2 || log_frames.size() != times.size()) {
    throw ValidationError("need at least two log frames with matching times");
  }
  EventStream stream;
  stream.width = width;
  stream.height = height;
  stream.contrast = C;
  const std::size_t n_pix = static_cast<std::size_t>(width) * height;
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    double ref = log_frames[0][pix];
    for (std::size_t f = 1; f < log_frames.size(); ++f) {
      const double prev = log_frames[f - 1][pix];
      const double cur = log_frames[f][pix];
      while (std::abs(cur - ref) >= C) {
        const int p = cur > ref ? 1 : -1;
        ref += p * C;
        const double frac = std::clamp((ref - prev) / (cur - prev), 0.0, 1.0);
        Event e;
        e.t = times[f - 1] + frac * (times[f] - times[f - 1]);
        e.x = static_cast<std::uint16_t>(pix % width);
        e.y = static_cast<std::uint16_t>(pix / width);
        e.p = static_cast<std::int8_t>(p);
        stream.events.push_back(e);
      }
    }
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

namespace {

std::vector<double> uniform_times(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = static_cast<double>(i) / (n - 1);
  t.back() = 1.0;
  return t;
}

}  // namespace

EventStream simulate_events(const GroundTruthScene& scene, const Trajectory& traj, const CameraIntrinsics& K,
                            int frames, double C, double eps_log, int threads) {
  if (frames < 2) throw ValidationError("simulate_events needs frames >= 2");
  if (!(C > 0.0)) throw ValidationError("contrast threshold must be positive");
  const std::vector<double> times = uniform_times(frames);
  std::vector<std::vector<double>> logs(frames);
  parallel_for(frames, threads, [&](int i) { logs[i] = log_gray(scene, traj.pose_at(times[i]), K, eps_log); });
  return events_from_log_frames(logs, times, K.width, K.height, C);
}

BlurSimulation simulate_blur(const GroundTruthScene& scene, const Trajectory& traj, const CameraIntrinsics& K,
                             int n_gt, int threads) {
  if (n_gt < 2) throw ValidationError("simulate_blur needs n_gt >= 2");
  BlurSimulation sim;
  sim.times = uniform_times(n_gt);
  sim.sharp.resize(n_gt);
  parallel_for(n_gt, threads, [&](int i) { sim.sharp[i] = render_scene(scene, traj.pose_at(sim.times[i]), K); });
  std::vector<double> acc(sim.sharp[0].data.size(), 0.0);
  for (const Image& f : sim.sharp) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += f.data[k];
  }
  sim.blurry = Image(K.width, K.height, 3);
  for (std::size_t k = 0; k < acc.size(); ++k) sim.blurry.data[k] = static_cast<float>(acc[k] / n_gt);
  return sim;
}

void SimulationConfig::validate() const {
  scene.validate();
  motion.validate();
  intrinsics.validate();
  if (frames < 2) throw ValidationError("frames must be >= 2");
  if (n_gt < 2) throw ValidationError("n_gt must be >= 2");
  if (!(contrast > 0.0)) throw ValidationError("contrast must be positive");
  if (!(eps_log > 0.0)) throw ValidationError("eps_log must be positive");
  if (!(near < far)) throw ValidationError("near must be < far");
  if (trajectory_samples < 2) throw ValidationError("trajectory_samples must be >= 2");
  for (double t : reference_times) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("reference times must lie in [0, 1]");
  }
}

Json to_json(const SimulationConfig& c) {
  const SceneParams& s = c.scene;
  const MotionParams& m = c.motion;
  return Json{{"scene",
               {{"kind", to_string(s.kind)},
                {"plane_depth", s.plane_depth},
                {"texture_seed", s.texture_seed},
                {"texture_waves", s.texture_waves},
                {"texture_k_min", s.texture_k_min},
                {"texture_k_max", s.texture_k_max},
                {"texture_sharpness", s.texture_sharpness}}},
              {"motion",
               {{"rotation_deg", m.rotation_deg},
                {"translation", m.translation},
                {"nonlinearity", m.nonlinearity},
                {"seed", m.seed}}},
              {"intrinsics", to_json(c.intrinsics)},
              {"frames", c.frames},
              {"n_gt", c.n_gt},
              {"contrast", c.contrast},
              {"eps_log", c.eps_log},
              {"near", c.near},
              {"far", c.far},
              {"exposure", c.exposure},
              {"reference_times", c.reference_times},
              {"trajectory_samples", c.trajectory_samples},
              {"seed", c.seed}};
}

SimulationConfig simulation_config_from_json(const Json& j) {
  using config_json::check_keys;
  using config_json::read_key;
  const std::string where = "simulation config";
  check_keys(j,
             {"scene", "motion", "intrinsics", "frames", "n_gt", "contrast", "eps_log", "near", "far", "exposure",
              "reference_times", "trajectory_samples", "seed"},
             where);
  SimulationConfig c;
  if (j.contains("scene")) {
    const Json& s = j.at("scene");
    const std::string w = where + " scene";
    check_keys(s,
               {"kind", "plane_depth", "texture_seed", "texture_waves", "texture_k_min", "texture_k_max",
                "texture_sharpness"},
               w);
    if (s.contains("kind")) {
      std::string kind;
      read_key(s, "kind", kind, w);
      try {
        c.scene.kind = scene_kind_from_string(kind);
      } catch (const Error& e) {
        throw ConfigError(w + ": " + e.what());
      }
    }
    read_key(s, "plane_depth", c.scene.plane_depth, w);
    read_key(s, "texture_seed", c.scene.texture_seed, w);
    read_key(s, "texture_waves", c.scene.texture_waves, w);
    read_key(s, "texture_k_min", c.scene.texture_k_min, w);
    read_key(s, "texture_k_max", c.scene.texture_k_max, w);
    read_key(s, "texture_sharpness", c.scene.texture_sharpness, w);
  }
  if (j.contains("motion")) {
    const Json& m = j.at("motion");
    const std::string w = where + " motion";
    check_keys(m, {"rotation_deg", "translation", "nonlinearity", "seed"}, w);
    read_key(m, "rotation_deg", c.motion.rotation_deg, w);
    read_key(m, "translation", c.motion.translation, w);
    read_key(m, "nonlinearity", c.motion.nonlinearity, w);
    read_key(m, "seed", c.motion.seed, w);
  }
  if (j.contains("intrinsics")) {
    try {
      c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  read_key(j, "frames", c.frames, where);
  read_key(j, "n_gt", c.n_gt, where);
  read_key(j, "contrast", c.contrast, where);
  read_key(j, "eps_log", c.eps_log, where);
  read_key(j, "near", c.near, where);
  read_key(j, "far", c.far, where);
  read_key(j, "exposure", c.exposure, where);
  read_key(j, "reference_times", c.reference_times, where);
  read_key(j, "trajectory_samples", c.trajectory_samples, where);
  read_key(j, "seed", c.seed, where);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

SimulationConfig read_simulation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return simulation_config_from_json(j);
}

DatasetSummary make_dataset(const SimulationConfig& config, const std::filesystem::path& out_dir, int threads) {
  config.validate();
  const GroundTruthScene scene(config.scene);
  const Trajectory traj = make_gt_trajectory(config.motion);
  const CameraIntrinsics& K = config.intrinsics;

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "sharp", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "sharp").string() + ": " + ec.message());

  const EventStream events = simulate_events(scene, traj, K, config.frames, config.contrast, config.eps_log, threads);
  const BlurSimulation blur = simulate_blur(scene, traj, K, config.n_gt, threads);

  DatasetManifest m;
  m.intrinsics = K;
  m.exposure = config.exposure;
  m.near = config.near;
  m.far = config.far;
  m.contrast = config.contrast;
  m.scene_depth = scene.reference_depth();
  m.event_file = "events.bin";
  m.blur_image = "blurry.png";
  m.blur_image_raw = "blurry.f32";
  m.gt_trajectory = "gt_trajectory.txt";
  m.gt_knots = traj.knot_twists;
  m.seeds = {{"simulation", config.seed}, {"texture", config.scene.texture_seed}, {"motion", config.motion.seed}};
  m.generator = {{"scene", to_string(config.scene.kind)},
                 {"frames", config.frames},
                 {"n_gt", config.n_gt},
                 {"rotation_deg", config.motion.rotation_deg},
                 {"translation", config.motion.translation},
                 {"nonlinearity", config.motion.nonlinearity}};

  write_events(out_dir / m.event_file, events);
  write_png(out_dir / m.blur_image, blur.blurry);
  write_float_image(out_dir / *m.blur_image_raw, blur.blurry);

  std::vector<double> ts(config.trajectory_samples);
  for (int i = 0; i < config.trajectory_samples; ++i) ts[i] = static_cast<double>(i) / (config.trajectory_samples - 1);
  export_trajectory(out_dir / *m.gt_trajectory, traj, ts);

  bool have_mid = false;
  Image mid_frame;
  for (std::size_t i = 0; i < config.reference_times.size(); ++i) {
    const double t = config.reference_times[i];
    const Image frame = render_scene(scene, traj.pose_at(t), K);
    char name[64];
    std::snprintf(name, sizeof name, "sharp/frame_%03zu", i);
    SharpFrameRef ref{t, std::string(name) + ".png", std::string(name) + ".f32"};
    write_png(out_dir / ref.png, frame);
    write_float_image(out_dir / ref.raw, frame);
    m.gt_sharp_frames.push_back(ref);
    if (std::abs(t - 0.5) < 1e-12) {
      mid_frame = frame;
      have_mid = true;
    }
  }
  write_manifest(out_dir / "manifest.json", m);

  DatasetSummary summary;
  summary.event_count = events.events.size();
  if (!have_mid) mid_frame = render_scene(scene, traj.pose_at(0.5), K);
  summary.blur_psnr_vs_mid = psnr(blur.blurry, mid_frame);
  return summary;
}

}  // namespace evdeblur
