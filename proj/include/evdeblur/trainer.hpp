#pragma once

// Joint optimization of the radiance field and the camera trajectory from one
// blurry image and its event stream.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evdeblur/events.hpp"
#include "evdeblur/field.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/io.hpp"
#include "evdeblur/measurement.hpp"
#include "evdeblur/optim.hpp"
#include "evdeblur/render.hpp"
#include "evdeblur/rng.hpp"
#include "evdeblur/trajectory.hpp"

namespace evdeblur {

inline constexpr int kDefaultIterations = 5000;
inline constexpr int kFullScaleIterations = 80000;

struct RunConfig {
  int n_virtual = 19;
  double alpha = 0.1;
  double beta = 0.1;
  int iterations = kDefaultIterations;
  double lr0 = 5e-4;
  double decay = 0.1;
  int color_batch = 1024;
  int event_batch = 1024;
  int knots = 4;
  double knot_init = 0.01;
  TrajectoryKind trajectory = TrajectoryKind::kSpline;
  std::uint64_t field_seed = 0;
  std::uint64_t knot_seed = 1;
  std::uint64_t sample_seed = 2;
  FieldArch arch;
  RenderSettings render{64, 2.0, 6.0, true, false};
  // near/far fall back to the dataset manifest when unset
  bool near_far_from_dataset = true;
  int max_window_retries = 8;
  int checkpoint_every = 1000;
  int log_every = 100;

  void validate() const;
};

Json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
RunConfig run_config_from_json(const Json& j);
RunConfig read_run_config(const std::filesystem::path& path);

/// One iteration's worth of measurements.
struct LossBatch {
  std::vector<Eigen::Vector2d> color_pixels;
  Eigen::MatrixXd blur_meas;  // color_pixels.size() × 3
  std::vector<double> virtual_times;
  std::optional<EventWindow> window;
  std::vector<Eigen::Vector2d> event_pixels;
  Eigen::VectorXd event_meas;  // normalized over the batch
};

template <typename S>
struct LossGradient {
  S loss = 0;
  double photometric = 0.0;
  double event = 0.0;
  bool event_used = false;
  std::vector<S> field;        // laid out like the parameters
  std::vector<double> knots;   // 6 per knot, (ω, v)
};

/// Loss and its gradient with respect to field parameters and knot twists.
/// Field math runs in S; the trajectory always runs in double. The long
/// double instantiation serves as a finite-difference reference.
template <typename S>
LossGradient<S> evaluate_loss(const FieldArch& arch, std::span<const S> params, const Trajectory& traj,
                              const LossBatch& batch, const CameraIntrinsics& K, const RenderSettings& settings,
                              const LossWeights& weights, Rng* rng);

extern template LossGradient<float> evaluate_loss<float>(const FieldArch&, std::span<const float>, const Trajectory&,
                                                         const LossBatch&, const CameraIntrinsics&,
                                                         const RenderSettings&, const LossWeights&, Rng*);
extern template LossGradient<double> evaluate_loss<double>(const FieldArch&, std::span<const double>,
                                                           const Trajectory&, const LossBatch&,
                                                           const CameraIntrinsics&, const RenderSettings&,
                                                           const LossWeights&, Rng*);
extern template LossGradient<long double> evaluate_loss<long double>(const FieldArch&, std::span<const long double>,
                                                                     const Trajectory&, const LossBatch&,
                                                                     const CameraIntrinsics&, const RenderSettings&,
                                                                     const LossWeights&, Rng*);

struct IterationLog {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double photometric = 0.0;
  double event = 0.0;
  bool event_used = false;
  int window_retries = 0;
  double lr = 0.0;
};

class Trainer {
 public:
  Trainer(const RunConfig& config, const Image& blurry, const EventStream& events, const CameraIntrinsics& K);
  /// Continues from a checkpoint.
  Trainer(const TrainingState& state, const RunConfig& config, const Image& blurry, const EventStream& events,
          const CameraIntrinsics& K);

  IterationLog step();
  bool done() const { return iteration_ >= config_.iterations; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t skipped_event_terms() const { return skipped_event_terms_; }

  const RunConfig& config() const { return config_; }
  const SceneField& field() const { return field_; }
  const Trajectory& trajectory() const { return trajectory_; }
  TrainingState state() const;

  /// Draws the next batch from the training stream (advances it).
  LossBatch sample_batch(int& window_retries);

 private:
  RunConfig config_;
  const Image& blurry_;
  const EventStream& events_;
  EventIndex event_index_;
  CameraIntrinsics K_;
  SceneField field_;
  Trajectory trajectory_;
  AdamState field_adam_;
  AdamState knot_adam_;
  Rng rng_;
  std::int64_t iteration_ = 0;
  std::int64_t skipped_event_terms_ = 0;
};

struct TrainingSummary {
  std::int64_t iterations = 0;
  double final_loss = 0.0;
  std::int64_t skipped_event_terms = 0;
};

using ProgressCallback = std::function<void(const IterationLog&)>;

/// Runs training to completion and writes into out_dir: config.json,
/// loss.csv, checkpoint.evck (also every checkpoint_every iterations),
/// trajectory.txt. Resumes from `resume` when given.
TrainingSummary run_training(const RunConfig& config, const Dataset& dataset, const std::filesystem::path& out_dir,
                             const std::optional<std::filesystem::path>& resume = std::nullopt,
                             const ProgressCallback& progress = nullptr);

/// Field and trajectory as stored by a checkpoint.
SceneField field_from_state(const TrainingState& s);

}  // namespace evdeblur
