// evdeblur: simulate | train | render | eval

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evdeblur/io.hpp"
#include "evdeblur/metrics.hpp"
#include "evdeblur/simulator.hpp"
#include "evdeblur/trainer.hpp"

namespace fs = std::filesystem;
using namespace evdeblur;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDegenerate = 2;

struct Globals {
  int threads = 1;
  bool strict = false;
};

int default_threads() {
  if (const char* env = std::getenv("EVDEBLUR_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring EVDEBLUR_THREADS=" << env << "\n";
  }
  return 1;
}

template <typename T>
void apply(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03zu", i);
  return buf;
}

// simulate -------------------------------------------------------------------

struct SimulateArgs {
  fs::path out;
  std::optional<fs::path> config;
  std::optional<std::string> scene;
  std::optional<double> rotation_deg, translation, nonlinearity, contrast, near, far;
  std::optional<std::uint64_t> motion_seed, texture_seed;
  std::optional<int> frames, n_gt;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  app.add_option("-o,--out", a.out, "Dataset directory to write")->required();
  app.add_option("-c,--config", a.config, "Simulation config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--scene", a.scene, "textured-plane | voxel-box-room | analytic-spheres");
  app.add_option("--rotation-deg", a.rotation_deg, "Start-to-end rotation in degrees");
  app.add_option("--translation", a.translation, "Start-to-end translation");
  app.add_option("--nonlinearity", a.nonlinearity, "Path bending");
  app.add_option("--motion-seed", a.motion_seed);
  app.add_option("--texture-seed", a.texture_seed);
  app.add_option("--frames", a.frames, "Renders used by the event simulator");
  app.add_option("--n-gt", a.n_gt, "Renders averaged into the blurry image");
  app.add_option("--contrast", a.contrast, "Event contrast threshold");
  app.add_option("--near", a.near);
  app.add_option("--far", a.far);
}

int run_simulate(const SimulateArgs& a, const Globals& g) {
  SimulationConfig c = a.config ? read_simulation_config(*a.config) : SimulationConfig{};
  if (a.scene) {
    try {
      c.scene.kind = scene_kind_from_string(*a.scene);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  apply(a.rotation_deg, c.motion.rotation_deg);
  apply(a.translation, c.motion.translation);
  apply(a.nonlinearity, c.motion.nonlinearity);
  apply(a.motion_seed, c.motion.seed);
  apply(a.texture_seed, c.scene.texture_seed);
  apply(a.frames, c.frames);
  apply(a.n_gt, c.n_gt);
  apply(a.contrast, c.contrast);
  apply(a.near, c.near);
  apply(a.far, c.far);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }

  ensure_dir(a.out);
  write_json(a.out / "simulation.json", to_json(c));
  const DatasetSummary s = make_dataset(c, a.out, g.threads);
  std::cout << "dataset " << a.out.string() << "\n"
            << "events " << s.event_count << "\n"
            << "blur_psnr_vs_mid " << format_psnr(s.blur_psnr_vs_mid) << " dB\n";
  if (s.event_count == 0) {
    std::cerr << "warning: empty event stream\n";
    return kExitDegenerate;
  }
  return kExitOk;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  fs::path dataset, out;
  std::optional<fs::path> config, resume;
  bool full_scale = false;
  std::optional<int> iterations, n_virtual, color_batch, event_batch, knots, n_samples, hidden_layers, hidden_width,
      pe_pos, pe_dir, log_every, checkpoint_every, max_window_retries;
  std::optional<double> alpha, beta, lr0, decay, knot_init, near, far;
  std::optional<std::string> trajectory, activation;
  std::optional<std::uint64_t> field_seed, knot_seed, sample_seed;
  std::optional<bool> stratified;
  bool quiet = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("-d,--dataset", a.dataset, "Dataset directory or manifest")->required();
  app.add_option("-o,--out", a.out, "Run directory")->required();
  app.add_option("-c,--config", a.config, "Run config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--resume", a.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  app.add_flag("--paper-scale", a.full_scale, "Train for 80000 iterations");
  app.add_option("--iterations", a.iterations);
  app.add_option("--n-virtual", a.n_virtual, "Virtual sharp images per blurry pixel");
  app.add_option("--alpha", a.alpha, "Event window length bound");
  app.add_option("--beta", a.beta, "Event loss weight");
  app.add_option("--lr0", a.lr0);
  app.add_option("--decay", a.decay, "Learning rate ratio at the last iteration");
  app.add_option("--color-batch", a.color_batch);
  app.add_option("--event-batch", a.event_batch);
  app.add_option("--knots", a.knots);
  app.add_option("--knot-init", a.knot_init);
  app.add_option("--trajectory", a.trajectory, "spline | linear");
  app.add_option("--field-seed", a.field_seed);
  app.add_option("--knot-seed", a.knot_seed);
  app.add_option("--sample-seed", a.sample_seed);
  app.add_option("--n-samples", a.n_samples, "Samples per ray");
  app.add_option("--near", a.near);
  app.add_option("--far", a.far);
  app.add_flag("--stratified,!--no-stratified", a.stratified);
  app.add_option("--hidden-layers", a.hidden_layers);
  app.add_option("--hidden-width", a.hidden_width);
  app.add_option("--pe-pos", a.pe_pos, "Positional encoding levels for positions");
  app.add_option("--pe-dir", a.pe_dir, "Positional encoding levels for directions");
  app.add_option("--activation", a.activation);
  app.add_option("--log-every", a.log_every);
  app.add_option("--checkpoint-every", a.checkpoint_every);
  app.add_option("--max-window-retries", a.max_window_retries);
  app.add_flag("-q,--quiet", a.quiet, "No progress lines");
}

RunConfig resolve_run_config(const TrainArgs& a) {
  RunConfig c = a.config ? read_run_config(*a.config) : RunConfig{};
  if (a.full_scale) c.iterations = kFullScaleIterations;
  apply(a.iterations, c.iterations);
  apply(a.n_virtual, c.n_virtual);
  apply(a.alpha, c.alpha);
  apply(a.beta, c.beta);
  apply(a.lr0, c.lr0);
  apply(a.decay, c.decay);
  apply(a.color_batch, c.color_batch);
  apply(a.event_batch, c.event_batch);
  apply(a.knots, c.knots);
  apply(a.knot_init, c.knot_init);
  apply(a.field_seed, c.field_seed);
  apply(a.knot_seed, c.knot_seed);
  apply(a.sample_seed, c.sample_seed);
  apply(a.n_samples, c.render.n_samples);
  apply(a.stratified, c.render.stratified);
  apply(a.hidden_layers, c.arch.hidden_layers);
  apply(a.hidden_width, c.arch.hidden_width);
  apply(a.pe_pos, c.arch.pe_levels_pos);
  apply(a.pe_dir, c.arch.pe_levels_dir);
  apply(a.log_every, c.log_every);
  apply(a.checkpoint_every, c.checkpoint_every);
  apply(a.max_window_retries, c.max_window_retries);
  if (a.near.has_value() != a.far.has_value()) throw ConfigError("give both --near and --far or neither");
  if (a.near) {
    c.render.near = *a.near;
    c.render.far = *a.far;
    c.near_far_from_dataset = false;
  }
  try {
    if (a.trajectory) c.trajectory = trajectory_kind_from_string(*a.trajectory);
    if (a.activation) c.arch.hidden_activation = activation_from_string(*a.activation);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

int run_train(const TrainArgs& a, const Globals& g) {
  const RunConfig config = resolve_run_config(a);
  const Dataset dataset = load_dataset(a.dataset);
  bool degenerate = false;
  if (config.beta > 0.0 && dataset.events.events.empty()) {
    std::cerr << "warning: empty event stream, the event term will be skipped\n";
    if (g.strict) return kExitDegenerate;
    degenerate = true;
  }

  ProgressCallback progress;
  if (!a.quiet) {
    progress = [](const IterationLog& log) {
      std::printf("iter %lld loss %.6f photometric %.6f event %.6f lr %.3g\n", static_cast<long long>(log.iteration),
                  log.loss, log.photometric, log.event, log.lr);
      std::fflush(stdout);
    };
  }
  const TrainingSummary s = run_training(config, dataset, a.out, a.resume, progress);
  std::cout << "iterations " << s.iterations << "\n"
            << "final_loss " << s.final_loss << "\n"
            << "skipped_event_terms " << s.skipped_event_terms << "\n"
            << "checkpoint " << (a.out / "checkpoint.evck").string() << "\n";
  if (s.skipped_event_terms > 0 && !degenerate) {
    std::cerr << "warning: event term skipped in " << s.skipped_event_terms << " iterations (zero-norm batches)\n";
    degenerate = true;
  }
  return degenerate && g.strict ? kExitDegenerate : kExitOk;
}

// render ---------------------------------------------------------------------

struct RenderArgs {
  fs::path checkpoint, out;
  std::vector<double> times;
  std::optional<int> frames;
  bool raw = false;
};

void add_render(CLI::App& app, RenderArgs& a) {
  app.add_option("-k,--checkpoint", a.checkpoint)->required()->check(CLI::ExistingFile);
  app.add_option("-o,--out", a.out, "Output directory")->required();
  auto* times = app.add_option("-t,--times", a.times, "Normalized timestamps in [0, 1]")->delimiter(',');
  auto* frames = app.add_option("-n,--frames", a.frames, "Uniform timestamps over the exposure");
  times->excludes(frames);
  app.add_flag("--raw", a.raw, "Also write float32 frames");
}

struct LoadedModel {
  TrainingState state;
  SceneField field;
  RenderSettings settings;
};

LoadedModel load_model(const fs::path& checkpoint) {
  TrainingState state = load_checkpoint(checkpoint);
  SceneField field = field_from_state(state);
  RenderSettings settings = state.render;
  settings.stratified = false;
  return {std::move(state), std::move(field), settings};
}

CameraIntrinsics intrinsics_of(const TrainingState& state) {
  if (!state.intrinsics) throw ParseError("checkpoint does not record camera intrinsics");
  return *state.intrinsics;
}

int run_render(const RenderArgs& a, const Globals& g) {
  std::vector<double> times = a.times;
  if (a.frames) {
    if (*a.frames < 1) throw ConfigError("--frames must be >= 1");
    times.resize(*a.frames);
    for (int i = 0; i < *a.frames; ++i) times[i] = *a.frames == 1 ? 0.5 : static_cast<double>(i) / (*a.frames - 1);
  }
  if (times.empty()) throw ConfigError("give --times or --frames");
  for (double t : times) {
    if (!(t >= 0.0 && t <= 1.0)) throw OutOfDomain("render time " + std::to_string(t) + " lies outside [0, 1]");
  }

  const LoadedModel model = load_model(a.checkpoint);
  const CameraIntrinsics K = intrinsics_of(model.state);
  ensure_dir(a.out);
  std::vector<Image> frames(times.size());
  parallel_for(static_cast<int>(times.size()), g.threads, [&](int i) {
    frames[i] = render_image(model.field, model.state.trajectory.pose_at(times[i]), K, model.settings);
  });
  std::ofstream index(a.out / "frames.csv");
  if (!index) throw IoError("cannot write " + (a.out / "frames.csv").string());
  index << "frame,t\n";
  index.precision(17);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string name = frame_name(i);
    write_png(a.out / (name + ".png"), frames[i]);
    if (a.raw) write_float_image(a.out / (name + ".f32"), frames[i]);
    index << name << ',' << times[i] << '\n';
  }
  std::cout << "rendered " << frames.size() << " frames to " << a.out.string() << "\n";
  return kExitOk;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  fs::path checkpoint, dataset, out;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("-k,--checkpoint", a.checkpoint)->required()->check(CLI::ExistingFile);
  app.add_option("-d,--dataset", a.dataset, "Dataset directory or manifest")->required();
  app.add_option("-o,--out", a.out, "Output directory")->required();
}

std::string time_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t=%.4f", t);
  return buf;
}

int run_eval(const EvalArgs& a, const Globals& g) {
  const Dataset dataset = load_dataset(a.dataset);
  if (!dataset.has_ground_truth()) throw MissingGroundTruth("dataset has no ground-truth frames or trajectory");
  const LoadedModel model = load_model(a.checkpoint);
  const CameraIntrinsics& K = dataset.manifest.intrinsics;
  const auto& refs = dataset.manifest.gt_sharp_frames;
  ensure_dir(a.out);

  std::vector<Image> gt(refs.size()), rendered(refs.size());
  parallel_for(static_cast<int>(refs.size()), g.threads, [&](int i) {
    gt[i] = dataset.sharp_frame(i);
    rendered[i] = render_image(model.field, model.state.trajectory.pose_at(refs[i].t), K, model.settings);
  });

  std::vector<MetricRow> rows;
  double sum_psnr = 0.0, sum_ssim = 0.0, sum_base_psnr = 0.0, sum_base_ssim = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string name = frame_name(i);
    write_png(a.out / (name + ".png"), rendered[i]);
    const double p = psnr(rendered[i], gt[i]), s = ssim(rendered[i], gt[i]);
    const double bp = psnr(dataset.blurry, gt[i]), bs = ssim(dataset.blurry, gt[i]);
    rows.push_back({"psnr", name, p});
    rows.push_back({"ssim", name, s});
    rows.push_back({"baseline_psnr", name, bp});
    rows.push_back({"baseline_ssim", name, bs});
    sum_psnr += p;
    sum_ssim += s;
    sum_base_psnr += bp;
    sum_base_ssim += bs;
  }
  const double n = static_cast<double>(refs.size());
  rows.push_back({"psnr", "mean", sum_psnr / n});
  rows.push_back({"ssim", "mean", sum_ssim / n});
  rows.push_back({"baseline_psnr", "mean", sum_base_psnr / n});
  rows.push_back({"baseline_ssim", "mean", sum_base_ssim / n});

  const auto samples = dataset.gt_poses();
  std::vector<RigidTransform> gt_poses, est_poses;
  for (const auto& [t, pose] : samples) {
    gt_poses.push_back(pose);
    est_poses.push_back(model.state.trajectory.pose_at(t));
  }
  const TrajectoryError te = trajectory_error(gt_poses, est_poses);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows.push_back({"rotation_error_deg", time_label(samples[i].first), te.rotation_deg[i]});
    rows.push_back({"translation_error", time_label(samples[i].first), te.translation[i]});
  }
  rows.push_back({"rotation_rmse_deg", "all", te.rotation_rmse_deg});
  rows.push_back({"translation_rmse", "all", te.translation_rmse});
  if (dataset.manifest.scene_depth) {
    rows.push_back({"translation_rmse_rel_depth", "all", te.translation_rmse / *dataset.manifest.scene_depth});
  }
  rows.push_back({"gauge_scale", "all", te.alignment.scale});

  std::ofstream csv(a.out / "metrics.csv");
  if (!csv) throw IoError("cannot write " + (a.out / "metrics.csv").string());
  csv << metrics_csv(rows);

  std::printf("%-10s %10s %8s %14s %14s\n", "frame", "psnr_dB", "ssim", "blurry_psnr_dB", "blurry_ssim");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::printf("%-10s %10s %8.4f %14s %14.4f\n", time_label(refs[i].t).c_str(), format_psnr(rows[4 * i].value).c_str(),
                rows[4 * i + 1].value, format_psnr(rows[4 * i + 2].value).c_str(), rows[4 * i + 3].value);
  }
  std::printf("mean       %10s %8.4f %14s %14.4f\n", format_psnr(sum_psnr / n).c_str(), sum_ssim / n,
              format_psnr(sum_base_psnr / n).c_str(), sum_base_ssim / n);
  std::printf("trajectory rotation_rmse %.4f deg, translation_rmse %.5f, gauge scale %.4f\n", te.rotation_rmse_deg,
              te.translation_rmse, te.alignment.scale);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deblurring from one blurry image and its event stream"};
  app.require_subcommand(1);
  Globals g;
  g.threads = default_threads();
  app.add_option("--threads", g.threads, "Worker threads (default $EVDEBLUR_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--strict", g.strict, "Treat degenerate-data warnings as errors");

  SimulateArgs sim;
  TrainArgs train;
  RenderArgs render;
  EvalArgs eval;
  add_simulate(*app.add_subcommand("simulate", "Generate a synthetic dataset"), sim);
  add_train(*app.add_subcommand("train", "Jointly fit the field and the trajectory"), train);
  add_render(*app.add_subcommand("render", "Render sharp frames from a checkpoint"), render);
  add_eval(*app.add_subcommand("eval", "Score a checkpoint against ground truth"), eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("simulate")) return run_simulate(sim, g);
    if (app.got_subcommand("train")) return run_train(train, g);
    if (app.got_subcommand("render")) return run_render(render, g);
    return run_eval(eval, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
