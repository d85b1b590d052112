#include "evdeblur/trainer.hpp"

#include <fstream>

#include "evdeblur/tape_render.hpp"
#include "json_util.hpp"

namespace evdeblur {

void RunConfig::validate() const {
  BlurModel{n_virtual}.validate();
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  LossWeights{beta}.validate();
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (color_batch < 1) throw ConfigError("color_batch must be >= 1");
  if (event_batch < 1) throw ConfigError("event_batch must be >= 1");
  if (trajectory == TrajectoryKind::kSpline && knots < 4) throw ConfigError("a spline trajectory needs >= 4 knots");
  if (!(knot_init > 0.0)) throw ConfigError("knot_init must be positive");
  if (max_window_retries < 0) throw ConfigError("max_window_retries must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  try {
    arch.validate();
    render.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

Json to_json(const RunConfig& c) {
  Json render{{"n_samples", c.render.n_samples},
              {"near", c.near_far_from_dataset ? Json() : Json(c.render.near)},
              {"far", c.near_far_from_dataset ? Json() : Json(c.render.far)},
              {"stratified", c.render.stratified},
              {"white_background", c.render.white_background}};
  return Json{{"n_virtual", c.n_virtual},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"iterations", c.iterations},
              {"lr0", c.lr0},
              {"decay", c.decay},
              {"color_batch", c.color_batch},
              {"event_batch", c.event_batch},
              {"knots", c.knots},
              {"knot_init", c.knot_init},
              {"trajectory", to_string(c.trajectory)},
              {"seeds", {{"field", c.field_seed}, {"knots", c.knot_seed}, {"sampling", c.sample_seed}}},
              {"arch", to_json(c.arch)},
              {"render", render},
              {"max_window_retries", c.max_window_retries},
              {"checkpoint_every", c.checkpoint_every},
              {"log_every", c.log_every}};
}

using config_json::check_keys;
using config_json::read_key;

RunConfig run_config_from_json(const Json& j) {
  const std::string where = "run config";
  check_keys(j,
             {"n_virtual", "alpha", "beta", "iterations", "lr0", "decay", "color_batch", "event_batch", "knots",
              "knot_init", "trajectory", "seeds", "arch", "render", "max_window_retries", "checkpoint_every",
              "log_every"},
             where);
  RunConfig c;
  read_key(j, "n_virtual", c.n_virtual, where);
  read_key(j, "alpha", c.alpha, where);
  read_key(j, "beta", c.beta, where);
  read_key(j, "iterations", c.iterations, where);
  read_key(j, "lr0", c.lr0, where);
  read_key(j, "decay", c.decay, where);
  read_key(j, "color_batch", c.color_batch, where);
  read_key(j, "event_batch", c.event_batch, where);
  read_key(j, "knots", c.knots, where);
  read_key(j, "knot_init", c.knot_init, where);
  read_key(j, "max_window_retries", c.max_window_retries, where);
  read_key(j, "checkpoint_every", c.checkpoint_every, where);
  read_key(j, "log_every", c.log_every, where);
  if (j.contains("trajectory")) {
    std::string kind;
    read_key(j, "trajectory", kind, where);
    try {
      c.trajectory = trajectory_kind_from_string(kind);
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (j.contains("seeds")) {
    const Json& s = j.at("seeds");
    check_keys(s, {"field", "knots", "sampling"}, where + " seeds");
    read_key(s, "field", c.field_seed, where);
    read_key(s, "knots", c.knot_seed, where);
    read_key(s, "sampling", c.sample_seed, where);
  }
  if (j.contains("arch")) {
    const Json& a = j.at("arch");
    const std::string w = where + " arch";
    check_keys(a, {"pe_levels_pos", "pe_levels_dir", "hidden_layers", "hidden_width", "hidden_activation"}, w);
    read_key(a, "pe_levels_pos", c.arch.pe_levels_pos, w);
    read_key(a, "pe_levels_dir", c.arch.pe_levels_dir, w);
    read_key(a, "hidden_layers", c.arch.hidden_layers, w);
    read_key(a, "hidden_width", c.arch.hidden_width, w);
    if (a.contains("hidden_activation")) {
      std::string act;
      read_key(a, "hidden_activation", act, w);
      try {
        c.arch.hidden_activation = activation_from_string(act);
      } catch (const Error& e) {
        throw ConfigError(w + ": " + e.what());
      }
    }
  }
  if (j.contains("render")) {
    const Json& r = j.at("render");
    const std::string w = where + " render";
    check_keys(r, {"n_samples", "near", "far", "stratified", "white_background"}, w);
    read_key(r, "n_samples", c.render.n_samples, w);
    read_key(r, "stratified", c.render.stratified, w);
    read_key(r, "white_background", c.render.white_background, w);
    const bool has_near = r.contains("near") && !r.at("near").is_null();
    const bool has_far = r.contains("far") && !r.at("far").is_null();
    if (has_near != has_far) throw ConfigError(w + ": give both near and far or neither");
    if (has_near) {
      read_key(r, "near", c.render.near, w);
      read_key(r, "far", c.render.far, w);
      c.near_far_from_dataset = false;
    }
  }
  c.validate();
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------

template <typename S>
LossGradient<S> evaluate_loss(const FieldArch& arch, std::span<const S> params, const Trajectory& traj,
                              const LossBatch& batch, const CameraIntrinsics& K, const RenderSettings& settings,
                              const LossWeights& weights, Rng* rng) {
  weights.validate();
  traj.validate();
  const Eigen::Index m = static_cast<Eigen::Index>(batch.color_pixels.size());
  const Eigen::Index n = static_cast<Eigen::Index>(batch.virtual_times.size());
  if (m == 0 || n == 0) throw ShapeMismatch("evaluate_loss: empty color batch");
  if (batch.blur_meas.rows() != m || batch.blur_meas.cols() != 3) {
    throw ShapeMismatch("evaluate_loss: blur measurement does not match the color batch");
  }
  const bool want_events = batch.window.has_value() && !batch.event_pixels.empty() && weights.beta != 0.0;
  const Eigen::Index e = want_events ? static_cast<Eigen::Index>(batch.event_pixels.size()) : 0;
  if (want_events && batch.event_meas.size() != e) {
    throw ShapeMismatch("evaluate_loss: event measurement does not match the event batch");
  }

  // trajectory on its own double tape
  ad::Tape<double> ktape;
  std::vector<ad::Var<double>> leaves;
  std::vector<lie::TwistOf<ad::Var<double>>> twists;
  for (const Vector6d& xi : traj.knot_twists) {
    lie::TwistOf<ad::Var<double>> tw;
    for (int i = 0; i < 3; ++i) {
      leaves.push_back(ktape.variable(xi[i]));
      tw.omega[i] = leaves.back();
    }
    for (int i = 0; i < 3; ++i) {
      leaves.push_back(ktape.variable(xi[3 + i]));
      tw.v[i] = leaves.back();
    }
    twists.push_back(tw);
  }
  const TrajectoryEvaluator<ad::Var<double>> evaluator(traj.kind, twists);
  std::vector<double> times = batch.virtual_times;
  if (want_events) {
    times.push_back(batch.window->t_start);
    times.push_back(batch.window->t_end);
  }
  std::vector<lie::Pose<ad::Var<double>>> kposes;
  for (double t : times) kposes.push_back(evaluator.at(t));

  // field and rendering in S, poses as leaves
  ad::Tape<S> tape;
  const FieldVars<S> vars = field_variables<S>(tape, arch, params);
  std::vector<TapePose<S>> poses;
  std::vector<RenderGroup> groups;
  for (std::size_t i = 0; i < kposes.size(); ++i) {
    RigidTransform T;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) T.rotation(r, c) = kposes[i].R[3 * r + c].scalar();
      T.translation[r] = kposes[i].t[r].scalar();
    }
    poses.push_back(pose_variables<S>(tape, T));
    groups.push_back(RenderGroup{static_cast<Eigen::Index>(i) < n ? batch.color_pixels : batch.event_pixels});
  }
  const ad::Var<S> rgb = render_groups<S>(vars, poses, groups, K, settings, rng);
  const ad::Var<S> blur_pred = ad::sum_row_blocks(ad::slice_rows(rgb, 0, n * m), n) / static_cast<double>(n);

  LossGradient<S> out;
  ad::Var<S> event_pred;
  const ad::Matrix<S> event_meas = want_events ? ad::Matrix<S>(batch.event_meas.cast<S>()) : ad::Matrix<S>();
  if (want_events) {
    try {
      event_pred = synth_event_batch(ad::slice_rows(rgb, n * m, e), ad::slice_rows(rgb, n * m + e, e));
      out.event_used = true;
    } catch (const ZeroNorm&) {
      out.event_used = false;
    }
  }
  const ad::Matrix<S> blur_meas = batch.blur_meas.cast<S>();
  const ad::Var<S> loss = total_loss<S>(blur_pred, blur_meas, out.event_used ? &event_pred : nullptr,
                                        out.event_used ? &event_meas : nullptr, weights);
  tape.backward(loss);

  out.loss = loss.scalar();
  out.photometric = (blur_pred.value().template cast<double>() - batch.blur_meas).array().square().mean();
  if (out.event_used) {
    out.event = (event_pred.value().template cast<double>() - batch.event_meas).array().square().mean();
  }
  out.field.resize(params.size());
  field_gradient<S>(tape, vars, out.field);

  // chain the pose gradients back to the knots: d/dξ Σ g·pose
  ad::Var<double> bridge = ktape.constant(0.0);
  for (std::size_t i = 0; i < kposes.size(); ++i) {
    const ad::Matrix<S> g_rt = tape.grad(poses[i].rotation_t);
    const ad::Matrix<S> g_t = tape.grad(poses[i].translation);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) bridge = bridge + kposes[i].R[3 * c + r] * static_cast<double>(g_rt(r, c));
      bridge = bridge + kposes[i].t[r] * static_cast<double>(g_t(0, r));
    }
  }
  ktape.backward(bridge);
  out.knots.resize(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) out.knots[i] = ktape.grad(leaves[i])(0, 0);
  return out;
}

template LossGradient<float> evaluate_loss<float>(const FieldArch&, std::span<const float>, const Trajectory&,
                                                  const LossBatch&, const CameraIntrinsics&, const RenderSettings&,
                                                  const LossWeights&, Rng*);
template LossGradient<double> evaluate_loss<double>(const FieldArch&, std::span<const double>, const Trajectory&,
                                                    const LossBatch&, const CameraIntrinsics&, const RenderSettings&,
                                                    const LossWeights&, Rng*);
template LossGradient<long double> evaluate_loss<long double>(const FieldArch&, std::span<const long double>,
                                                              const Trajectory&, const LossBatch&,
                                                              const CameraIntrinsics&, const RenderSettings&,
                                                              const LossWeights&, Rng*);

// ---------------------------------------------------------------------------

namespace {

std::vector<double> flatten(const Trajectory& t) {
  std::vector<double> v;
  for (const auto& k : t.knot_twists) v.insert(v.end(), k.data(), k.data() + 6);
  return v;
}

void unflatten(std::span<const double> v, Trajectory& t) {
  for (std::size_t j = 0; j < t.knot_twists.size(); ++j) {
    for (int i = 0; i < 6; ++i) t.knot_twists[j][i] = v[6 * j + i];
  }
}

}  // namespace

Trainer::Trainer(const RunConfig& config, const Image& blurry, const EventStream& events, const CameraIntrinsics& K)
    : config_(config),
      blurry_(blurry),
      events_(events),
      event_index_(events),
      K_(K),
      field_(SceneField::initialize(config.arch, config.field_seed)),
      trajectory_(Trajectory::random_init(config.trajectory, config.knots, config.knot_init, config.knot_seed)),
      rng_(config.sample_seed) {
  config_.validate();
  if (blurry.width != K.width || blurry.height != K.height) {
    throw ShapeMismatch("blurry image size does not match the intrinsics");
  }
  if (events.width != K.width || events.height != K.height) {
    throw ShapeMismatch("event sensor size does not match the intrinsics");
  }
  field_adam_ = AdamState::for_size(field_.params().size(), config_.lr0, config_.decay, config_.iterations);
  knot_adam_ = AdamState::for_size(trajectory_.parameter_count(), config_.lr0, config_.decay, config_.iterations);
}

Trainer::Trainer(const TrainingState& state, const RunConfig& config, const Image& blurry, const EventStream& events,
                 const CameraIntrinsics& K)
    : Trainer(config, blurry, events, K) {
  if (!(state.arch == config_.arch)) throw VersionMismatch("checkpoint architecture differs from the run config");
  if (state.trajectory.kind != config_.trajectory) {
    throw VersionMismatch("checkpoint trajectory kind differs from the run config");
  }
  field_ = field_from_state(state);
  trajectory_ = state.trajectory;
  field_adam_ = state.field_adam;
  knot_adam_ = state.knot_adam;
  rng_.set_state(state.rng_state);
  iteration_ = state.iteration;
}

LossBatch Trainer::sample_batch(int& window_retries) {
  LossBatch b;
  b.virtual_times = BlurModel{config_.n_virtual}.times();
  b.blur_meas.resize(config_.color_batch, 3);
  for (int k = 0; k < config_.color_batch; ++k) {
    const int x = static_cast<int>(rng_.index(K_.width));
    const int y = static_cast<int>(rng_.index(K_.height));
    b.color_pixels.emplace_back(x, y);
    for (int c = 0; c < 3; ++c) b.blur_meas(k, c) = blurry_.at(x, y, blurry_.channels == 1 ? 0 : c);
  }
  window_retries = 0;
  if (config_.beta == 0.0) return b;
  for (int attempt = 0; attempt <= config_.max_window_retries; ++attempt) {
    const EventWindow w = sample_event_window(config_.alpha, rng_);
    std::vector<Eigen::Vector2d> px;
    std::vector<double> E;
    for (int k = 0; k < config_.event_batch; ++k) {
      const int x = static_cast<int>(rng_.index(K_.width));
      const int y = static_cast<int>(rng_.index(K_.height));
      px.emplace_back(x, y);
      E.push_back(event_index_.polarity_sum(x, y, w));
    }
    try {
      const std::vector<double> En = normalize_event_image(E);
      b.window = w;
      b.event_pixels = std::move(px);
      b.event_meas = Eigen::Map<const Eigen::VectorXd>(En.data(), static_cast<Eigen::Index>(En.size()));
      return b;
    } catch (const ZeroNorm&) {
      ++window_retries;
    }
  }
  return b;
}

IterationLog Trainer::step() {
  IterationLog log;
  LossBatch batch = sample_batch(log.window_retries);
  const LossGradient<float> g =
      evaluate_loss<float>(config_.arch, field_.params(), trajectory_, batch, K_, config_.render,
                           LossWeights{config_.beta}, config_.render.stratified ? &rng_ : nullptr);
  if (config_.beta != 0.0 && !g.event_used) ++skipped_event_terms_;
  log.iteration = iteration_;
  log.loss = static_cast<double>(g.loss);
  log.photometric = g.photometric;
  log.event = g.event;
  log.event_used = g.event_used;
  log.lr = field_adam_.learning_rate();

  adam_step<float>(field_.mutable_params(), g.field, field_adam_);
  std::vector<double> knots = flatten(trajectory_);
  adam_step<double>(knots, g.knots, knot_adam_);
  unflatten(knots, trajectory_);
  ++iteration_;
  return log;
}

TrainingState Trainer::state() const {
  TrainingState s;
  s.arch = field_.arch();
  s.field_params = field_.params();
  s.trajectory = trajectory_;
  s.field_adam = field_adam_;
  s.knot_adam = knot_adam_;
  s.rng_state = rng_.state();
  s.iteration = iteration_;
  s.render = config_.render;
  s.render.stratified = false;
  s.intrinsics = K_;
  s.config = to_json(config_);
  return s;
}

SceneField field_from_state(const TrainingState& s) { return SceneField(s.arch, s.field_params); }

TrainingSummary run_training(const RunConfig& config_in, const Dataset& dataset, const std::filesystem::path& out_dir,
                             const std::optional<std::filesystem::path>& resume, const ProgressCallback& progress) {
  RunConfig config = config_in;
  if (config.near_far_from_dataset) {
    config.render.near = dataset.manifest.near;
    config.render.far = dataset.manifest.far;
    config.near_far_from_dataset = false;
  }
  config.validate();

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  {
    std::ofstream cfg(out_dir / "config.json");
    if (!cfg) throw IoError("cannot write " + (out_dir / "config.json").string());
    cfg << to_json(config).dump(2) << "\n";
  }

  const CameraIntrinsics& K = dataset.manifest.intrinsics;
  std::optional<Trainer> trainer;
  if (resume) {
    trainer.emplace(load_checkpoint(*resume, &config.arch), config, dataset.blurry, dataset.events, K);
  } else {
    trainer.emplace(config, dataset.blurry, dataset.events, K);
  }

  const std::filesystem::path loss_path = out_dir / "loss.csv";
  const bool append = resume.has_value() && std::filesystem::exists(loss_path);
  std::ofstream loss_csv(loss_path, append ? std::ios::app : std::ios::trunc);
  if (!loss_csv) throw IoError("cannot write " + loss_path.string());
  if (!append) loss_csv << "iteration,loss,photometric,event,event_used,window_retries,lr\n";
  loss_csv.precision(9);

  const std::filesystem::path ckpt = out_dir / "checkpoint.evck";
  TrainingSummary summary;
  while (!trainer->done()) {
    const IterationLog log = trainer->step();
    loss_csv << log.iteration << ',' << log.loss << ',' << log.photometric << ',' << log.event << ','
             << (log.event_used ? 1 : 0) << ',' << log.window_retries << ',' << log.lr << '\n';
    summary.final_loss = log.loss;
    if (progress && (log.iteration % config.log_every == 0 || trainer->done())) progress(log);
    if (trainer->iteration() % config.checkpoint_every == 0 && !trainer->done()) {
      save_checkpoint(ckpt, trainer->state());
    }
  }
  loss_csv.flush();
  save_checkpoint(ckpt, trainer->state());
  std::vector<double> ts(101);
  for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = static_cast<double>(i) / (ts.size() - 1);
  export_trajectory(out_dir / "trajectory.txt", trainer->trajectory(), ts);

  summary.iterations = trainer->iteration();
  summary.skipped_event_terms = trainer->skipped_event_terms();
  return summary;
}

}  // namespace evdeblur
