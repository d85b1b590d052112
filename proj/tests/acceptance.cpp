// Acceptance checks. Usage: acceptance [criterion ...] [--work DIR]
// Prints one PASS/FAIL line per criterion; exit status is nonzero if any fails.

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "evdeblur/io.hpp"
#include "evdeblur/measurement.hpp"
#include "evdeblur/metrics.hpp"
#include "evdeblur/simulator.hpp"
#include "evdeblur/trainer.hpp"

namespace fs = std::filesystem;
using namespace evdeblur;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_work = fs::temp_directory_path() / "evdeblur_acceptance";

// 1 --------------------------------------------------------------------------

Outcome spline_basis() {
  // cumulative basis matrix applied to (1, u, u², u³)
  const double M[4][4] = {{6, 0, 0, 0}, {5, 3, -3, 1}, {1, 3, 3, -2}, {0, 0, 0, 1}};
  constexpr double kTol = 1e-12;
  double worst = 0.0;
  for (double u : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double powers[4] = {1.0, u, u * u, u * u * u};
    const CumulativeBasis b = cumulative_basis(u);
    for (int r = 0; r < 4; ++r) {
      double expected = 0.0;
      for (int c = 0; c < 4; ++c) expected += M[r][c] * powers[c];
      worst = std::max(worst, std::abs(b.b[r] - expected / 6.0));
    }
  }
  const CumulativeBasis b0 = cumulative_basis(0.0), b1 = cumulative_basis(1.0);
  const bool anchors = std::abs(b0.b[1] - 5.0 / 6.0) < kTol && std::abs(b0.b[2] - 1.0 / 6.0) < kTol &&
                       std::abs(b0.b[3]) < kTol && std::abs(b1.b[1] - 1.0) < kTol &&
                       std::abs(b1.b[2] - 5.0 / 6.0) < kTol && std::abs(b1.b[3] - 1.0 / 6.0) < kTol;
  return {worst < kTol && anchors, fmt("max deviation %.3g (tol %.0e)", worst, kTol)};
}

// 2 --------------------------------------------------------------------------

Outcome lie_round_trip() {
  constexpr double kTol = 1e-9;
  constexpr int kCount = 10000;
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < kCount; ++i) {
    Vector6d xi;
    // rotation angles up to 0.95 π, translations up to 2
    Eigen::Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (axis.norm() < 1e-3) axis = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    xi.head<3>() = axis.normalized() * rng.uniform(0.0, 0.95 * std::numbers::pi);
    for (int k = 3; k < 6; ++k) xi[k] = rng.uniform(-2, 2);
    const Vector6d back = se3_log(se3_exp(Twist(xi))).vector();
    worst = std::max(worst, (back - xi).cwiseAbs().maxCoeff());
  }
  return {worst < kTol, fmt("%d twists, max |log(exp(xi)) - xi| %.3g (tol %.0e)", kCount, worst, kTol)};
}

// 3 --------------------------------------------------------------------------

Outcome gradient_check() {
  constexpr double kH = 1e-5;
  constexpr double kRelTol = 1e-5;
  constexpr double kAbsFloor = 1e-8;

  CameraIntrinsics K;
  K.fx = K.fy = 6.0;
  K.cx = K.cy = 4.0;
  K.width = K.height = 8;
  FieldArch arch;
  arch.hidden_layers = 1;
  arch.hidden_width = 8;
  arch.pe_levels_pos = 2;
  arch.pe_levels_dir = 1;
  arch.hidden_activation = Activation::kSoftplus;
  const RenderSettings settings{16, 3.0, 5.0, false, false};
  const LossWeights weights{0.1};

  const SceneField field = SceneField::initialize(arch, 5);
  const std::vector<double> params(field.params().begin(), field.params().end());
  MotionParams motion;
  motion.rotation_deg = 6.0;
  motion.translation = 0.2;
  const Trajectory gt = make_gt_trajectory(motion);
  Trajectory traj = gt;
  for (auto& k : traj.knot_twists) k += Vector6d::Constant(0.01);

  const GroundTruthScene scene(SceneParams{});
  const Image blurry = simulate_blur(scene, gt, K, 32).blurry;
  LossBatch batch;
  batch.virtual_times = BlurModel{5}.times();
  batch.blur_meas.resize(64, 3);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      batch.color_pixels.emplace_back(x, y);
      batch.event_pixels.emplace_back(x, y);
      for (int c = 0; c < 3; ++c) batch.blur_meas(y * 8 + x, c) = blurry.at(x, y, c);
    }
  }
  batch.window = EventWindow{0.3, 0.45};
  const EventStream events = simulate_events(scene, gt, K, 100, 0.2, kLogEpsilon);
  std::vector<Eigen::Vector2i> px;
  for (const auto& p : batch.event_pixels) px.emplace_back(static_cast<int>(p.x()), static_cast<int>(p.y()));
  const std::vector<double> acc = accumulate_events(events, *batch.window, 0.2, px);
  const std::vector<double> en = normalize_event_image(acc);
  batch.event_meas = Eigen::Map<const Eigen::VectorXd>(en.data(), static_cast<Eigen::Index>(en.size()));

  const LossGradient<double> an = evaluate_loss<double>(arch, params, traj, batch, K, settings, weights, nullptr);
  if (!an.event_used) return {false, "event term unexpectedly unused"};

  // extended-precision reference loss
  const std::vector<long double> base(params.begin(), params.end());
  auto loss = [&](const std::vector<long double>& p, const Trajectory& t) {
    return evaluate_loss<long double>(arch, p, t, batch, K, settings, weights, nullptr).loss;
  };
  const long double two_h = 2.0L * kH;

  double worst_rel = 0.0, worst_abs = 0.0;
  auto check = [&](double a, double fd) {
    if (std::abs(fd) < kAbsFloor) {
      worst_abs = std::max(worst_abs, std::abs(a - fd));
    } else {
      worst_rel = std::max(worst_rel, std::abs(a - fd) / std::abs(fd));
    }
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<long double> p = base, m = base;
    p[i] += kH;
    m[i] -= kH;
    check(an.field[i], static_cast<double>((loss(p, traj) - loss(m, traj)) / two_h));
  }
  for (std::size_t i = 0; i < an.knots.size(); ++i) {
    Trajectory p = traj, m = traj;
    p.knot_twists[i / 6][i % 6] += kH;
    m.knot_twists[i / 6][i % 6] -= kH;
    check(an.knots[i], static_cast<double>((loss(base, p) - loss(base, m)) / two_h));
  }
  const bool pass = worst_rel < kRelTol && worst_abs < kAbsFloor && an.knots.size() == 24;
  return {pass, fmt("%zu field params + %zu knot coords, max rel err %.3g (tol %.0e), max abs err on small entries %.3g",
                    params.size(), an.knots.size(), worst_rel, kRelTol, worst_abs)};
}

// 4 --------------------------------------------------------------------------

Outcome partition_of_unity() {
  constexpr double kTol = 1e-6;
  constexpr int kRays = 1000;
  FieldArch arch;
  arch.hidden_layers = 2;
  arch.hidden_width = 16;
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < kRays; ++i) {
    const SceneField field = SceneField::initialize(arch, 100 + i);
    RenderSettings s;
    s.n_samples = 2 + static_cast<int>(rng.index(127));
    s.near = rng.uniform(0.1, 3.0);
    s.far = s.near + rng.uniform(0.1, 6.0);
    s.stratified = rng.uniform() < 0.5;
    const SampleDepths depths = sample_depths(s, &rng);
    Eigen::Vector3d o(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::Vector3d d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1));
    d.normalize();
    // density scale spans nearly transparent to fully opaque
    const double scale = std::pow(10.0, rng.uniform(-2.0, 4.0));
    std::vector<double> sigma(depths.t.size());
    std::vector<Eigen::Vector3d> colors(depths.t.size());
    for (std::size_t k = 0; k < depths.t.size(); ++k) {
      const FieldSample f = field_eval(field, o + depths.t[k] * d, d);
      sigma[k] = scale * f.sigma;
      colors[k] = f.color;
    }
    const CompositeResult r = composite(sigma, depths.delta, colors, false);
    double total = r.residual_transmittance;
    for (double w : r.weights) total += w;
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst < kTol, fmt("%d rays, max |sum w + T - 1| %.3g (tol %.0e)", kRays, worst, kTol)};
}

// 5 --------------------------------------------------------------------------

Outcome event_consistency() {
  constexpr int kWindows = 100;
  constexpr double kRequiredHalf = 0.99;
  SimulationConfig config;
  config.near = 3.0;
  config.far = 5.0;
  const fs::path dir = g_work / "c5";
  make_dataset(config, dir);
  const Dataset data = load_dataset(dir);
  const double C = data.manifest.contrast;
  const CameraIntrinsics& K = data.manifest.intrinsics;
  const GroundTruthScene scene(config.scene);
  const Trajectory traj = make_gt_trajectory(config.motion);

  std::vector<Eigen::Vector2i> pixels;
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) pixels.emplace_back(x, y);
  }
  Rng rng(5);
  long total = 0, within_c = 0, within_half = 0;
  double worst = 0.0;
  for (int w = 0; w < kWindows; ++w) {
    const EventWindow win = sample_event_window(0.1, rng);
    const std::vector<double> acc = accumulate_events(data.events, win, C, pixels);
    const std::vector<double> l0 = log_gray(scene, traj.pose_at(win.t_start), K, config.eps_log);
    const std::vector<double> l1 = log_gray(scene, traj.pose_at(win.t_end), K, config.eps_log);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const double err = std::abs(acc[i] - (l1[i] - l0[i]));
      worst = std::max(worst, err);
      within_c += err <= C;
      within_half += err <= C / 2;
      ++total;
    }
  }
  const double frac_half = static_cast<double>(within_half) / total;
  const bool pass = within_c == total && frac_half >= kRequiredHalf;
  return {pass, fmt("%ld pixel-windows, %ld exceed C (max err %.3f C), %.2f%% within C/2 (need %.0f%%)", total,
                    total - within_c, worst / C, 100.0 * frac_half, 100.0 * kRequiredHalf)};
}

// 6 --------------------------------------------------------------------------

Outcome contrast_invariance() {
  constexpr double kTol = 1e-9;
  SimulationConfig config;
  config.frames = 60;
  config.n_gt = 20;
  const GroundTruthScene scene(config.scene);
  const Trajectory traj = make_gt_trajectory(config.motion);
  const CameraIntrinsics K;
  const EventStream events = simulate_events(scene, traj, K, config.frames, config.contrast, config.eps_log);

  Rng rng(6);
  std::vector<Eigen::Vector2i> pixels;
  for (int i = 0; i < 256; ++i) {
    pixels.emplace_back(static_cast<int>(rng.index(K.width)), static_cast<int>(rng.index(K.height)));
  }
  const EventWindow win{0.2, 0.6};
  const std::vector<double> measured = accumulate_events(events, win, config.contrast, pixels);
  std::vector<double> predicted(pixels.size());
  for (double& v : predicted) v = rng.uniform(-1, 1);
  const std::vector<double> pred_n = normalize_event_image(predicted);
  Eigen::MatrixXd blur_pred(16, 3), blur_meas(16, 3);
  for (Eigen::Index i = 0; i < blur_pred.size(); ++i) {
    blur_pred.data()[i] = rng.uniform();
    blur_meas.data()[i] = rng.uniform();
  }
  const LossWeights w{0.1};
  const std::vector<double> base = normalize_event_image(measured);
  const double base_loss = total_loss(blur_pred, blur_meas, pred_n, base, w);

  double worst_entry = 0.0, worst_loss = 0.0;
  for (double k : {0.1, 1.0, 7.3}) {
    std::vector<double> scaled = measured;
    for (double& v : scaled) v *= k;
    const std::vector<double> en = normalize_event_image(scaled);
    for (std::size_t i = 0; i < en.size(); ++i) worst_entry = std::max(worst_entry, std::abs(en[i] - base[i]));
    worst_loss = std::max(worst_loss, std::abs(total_loss(blur_pred, blur_meas, pred_n, en, w) - base_loss));
  }
  return {worst_entry < kTol && worst_loss < kTol,
          fmt("k in {0.1, 1, 7.3}: max entry change %.3g, max loss change %.3g (tol %.0e)", worst_entry, worst_loss,
              kTol)};
}

// 7-9 ------------------------------------------------------------------------

// Desk-scale training settings shared by the training criteria.
RunConfig desk_run_config(int iterations) {
  RunConfig c;
  c.iterations = iterations;
  c.lr0 = 1e-2;
  c.decay = 0.1;
  c.color_batch = 128;
  c.event_batch = 128;
  c.arch.hidden_layers = 2;
  c.arch.hidden_width = 64;
  c.arch.hidden_activation = Activation::kRelu;
  c.render.n_samples = 8;
  c.render.stratified = false;
  c.render.near = 3.0;
  c.render.far = 5.0;
  c.near_far_from_dataset = false;
  return c;
}

SimulationConfig desk_scene() {
  SimulationConfig s;
  s.near = 3.0;
  s.far = 5.0;
  return s;
}

struct TrainedModel {
  Dataset data;
  SceneField field;
  Trajectory trajectory;
  RenderSettings render;
};

TrainedModel train(const SimulationConfig& sim, const RunConfig& run, const std::string& name) {
  const fs::path dir = g_work / name;
  make_dataset(sim, dir);
  Dataset data = load_dataset(dir);
  const auto t0 = std::chrono::steady_clock::now();
  Trainer trainer(run, data.blurry, data.events, data.manifest.intrinsics);
  while (!trainer.done()) trainer.step();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  [%s] %d iterations in %.0f s\n", name.c_str(), run.iterations, secs);
  std::fflush(stdout);
  RenderSettings rs = run.render;
  rs.stratified = false;
  return {std::move(data), trainer.field(), trainer.trajectory(), rs};
}

double frame_psnr(const TrainedModel& m, std::size_t i) {
  const double t = m.data.manifest.gt_sharp_frames[i].t;
  const Image img = render_image(m.field, m.trajectory.pose_at(t), m.data.manifest.intrinsics, m.render);
  return psnr(img, m.data.sharp_frame(i));
}

std::size_t mid_frame(const Dataset& d) {
  const auto& refs = d.manifest.gt_sharp_frames;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (std::abs(refs[i].t - 0.5) < 1e-12) return i;
  }
  throw MissingGroundTruth("no mid-exposure reference frame");
}

double mean_psnr(const TrainedModel& m) {
  double sum = 0.0;
  const std::size_t n = m.data.manifest.gt_sharp_frames.size();
  for (std::size_t i = 0; i < n; ++i) sum += frame_psnr(m, i);
  return sum / static_cast<double>(n);
}

Outcome desk_recovery() {
  constexpr double kMinGainDb = 3.0;
  constexpr double kMaxRotDeg = 1.0;
  constexpr double kMaxTransFrac = 0.02;
  constexpr int kIterations = kDefaultIterations;
  const SimulationConfig sim = desk_scene();
  const double depth = sim.scene.plane_depth;
  if (sim.motion.rotation_deg > 5.0 || sim.motion.translation > 0.05 * depth) {
    return {false, "scene motion outside the moderate range"};
  }
  const TrainedModel m = train(sim, desk_run_config(kIterations), "c7");
  const std::size_t mid = mid_frame(m.data);
  const double rendered = frame_psnr(m, mid);
  const double baseline = psnr(m.data.blurry, m.data.sharp_frame(mid));

  std::vector<RigidTransform> gt, est;
  for (const auto& [t, pose] : m.data.gt_poses()) {
    gt.push_back(pose);
    est.push_back(m.trajectory.pose_at(t));
  }
  const TrajectoryError te = trajectory_error(gt, est);
  const double trans_frac = te.translation_rmse / depth;
  const bool pass =
      rendered >= baseline + kMinGainDb && te.rotation_rmse_deg < kMaxRotDeg && trans_frac < kMaxTransFrac;
  return {pass, fmt("mid PSNR %.2f dB vs blurry %.2f dB (need +%.0f), rotation RMSE %.3f deg (< %.0f), translation "
                    "RMSE %.2f%% of depth (< %.0f%%)",
                    rendered, baseline, kMinGainDb, te.rotation_rmse_deg, kMaxRotDeg, 100.0 * trans_frac,
                    100.0 * kMaxTransFrac)};
}

Outcome virtual_image_count() {
  constexpr int kIterations = 2000;
  SimulationConfig sim = desk_scene();
  sim.motion.rotation_deg = 10.0;
  sim.motion.translation = 0.3;
  sim.scene.texture_k_max = 12.0;
  RunConfig run19 = desk_run_config(kIterations);
  run19.n_virtual = 19;
  RunConfig run7 = run19;
  run7.n_virtual = 7;
  const double p19 = mean_psnr(train(sim, run19, "c8_n19"));
  const double p7 = mean_psnr(train(sim, run7, "c8_n7"));
  return {p19 >= p7, fmt("mean PSNR over reference frames: n=19 %.2f dB, n=7 %.2f dB", p19, p7)};
}

Outcome spline_vs_linear() {
  constexpr int kIterations = 2000;
  SimulationConfig sim = desk_scene();
  sim.motion.nonlinearity = 1.0;
  RunConfig spline = desk_run_config(kIterations);
  spline.trajectory = TrajectoryKind::kSpline;
  RunConfig linear = spline;
  linear.trajectory = TrajectoryKind::kLinear;
  const TrainedModel ms = train(sim, spline, "c9_spline");
  const TrainedModel ml = train(sim, linear, "c9_linear");
  const double ps = frame_psnr(ms, mid_frame(ms.data));
  const double pl = frame_psnr(ml, mid_frame(ml.data));
  return {ps >= pl, fmt("mid PSNR on bent motion: spline %.2f dB, linear %.2f dB", ps, pl)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, Criterion> criteria{
      {1, {"spline basis exactness", spline_basis}},
      {2, {"Lie round trip", lie_round_trip}},
      {3, {"end-to-end gradient correctness", gradient_check}},
      {4, {"renderer partition of unity", partition_of_unity}},
      {5, {"event model consistency", event_consistency}},
      {6, {"contrast threshold invariance", contrast_invariance}},
      {7, {"desk-scale recovery", desk_recovery}},
      {8, {"virtual image count trend", virtual_image_count}},
      {9, {"spline vs linear trend", spline_vs_linear}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      g_work = argv[++i];
      continue;
    }
    const int id = std::atoi(arg.c_str());
    if (!criteria.contains(id)) {
      std::fprintf(stderr, "usage: acceptance [1-9 ...] [--work DIR]\n");
      return 2;
    }
    selected.push_back(id);
  }
  if (selected.empty()) {
    for (const auto& [id, c] : criteria) selected.push_back(id);
  }

  int failures = 0;
  for (int id : selected) {
    const Criterion& c = criteria.at(id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d (%s): %s | %s | %.1f s\n", id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
