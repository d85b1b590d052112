#pragma once

// Synthesis of the two measurements from a field and a trajectory: the
// blurry image as the mean of virtual sharp renders across the exposure, and
// the log-brightness change between the ends of an event window.

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "evdeblur/autodiff.hpp"
#include "evdeblur/camera.hpp"
#include "evdeblur/events.hpp"
#include "evdeblur/field.hpp"
#include "evdeblur/render.hpp"
#include "evdeblur/rng.hpp"
#include "evdeblur/trajectory.hpp"

namespace evdeblur {

inline constexpr double kLogEpsilon = 1e-5;
inline constexpr double kZeroNormThreshold = 1e-12;

struct BlurModel {
  int n_virtual = 19;

  void validate() const;
  /// Virtual-image times i/(n−1), i = 0…n−1.
  std::vector<double> times() const;
};

struct LossWeights {
  double beta = 0.1;

  void validate() const;
};

/// Anything that maps a ray to linear rgb.
using RayRenderer = std::function<Eigen::Vector3d(const Ray&)>;

Eigen::Vector3d synth_blur_pixel(const RayRenderer& render, const Trajectory& traj, const CameraIntrinsics& K,
                                 const Eigen::Vector2d& pixel, const BlurModel& model);
Eigen::Vector3d synth_blur_pixel(const SceneField& field, const Trajectory& traj, const CameraIntrinsics& K,
                                 const Eigen::Vector2d& pixel, const BlurModel& model,
                                 const RenderSettings& settings);

/// BT.601 luma weights.
inline constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

inline double luminance(const Eigen::Vector3d& rgb) { return kLumaR * rgb[0] + kLumaG * rgb[1] + kLumaB * rgb[2]; }

/// C · Σ p per pixel over the window's open interval. Linear scan of the
/// stream; see EventIndex for repeated queries.
std::vector<double> accumulate_events(const EventStream& stream, const EventWindow& window, double C,
                                      std::span<const Eigen::Vector2i> pixels);

/// E / ‖E‖₂. Throws ZeroNorm when ‖E‖₂ < 1e-12.
std::vector<double> normalize_event_image(std::span<const double> E);

/// log(g_end + ε) − log(g_start + ε) of the luminance rendered at the window
/// endpoints.
double synth_event_pixel(const RayRenderer& render, const Trajectory& traj, const CameraIntrinsics& K,
                         const Eigen::Vector2d& pixel, const EventWindow& window);
double synth_event_pixel(const SceneField& field, const Trajectory& traj, const CameraIntrinsics& K,
                         const Eigen::Vector2d& pixel, const EventWindow& window, const RenderSettings& settings);

/// Mean squared photometric error plus β times the mean squared event error.
/// Blur batches are n × 3, event batches length m.
double total_loss(const Eigen::MatrixXd& blur_pred, const Eigen::MatrixXd& blur_meas,
                  std::span<const double> event_pred_normalized, std::span<const double> event_meas_normalized,
                  const LossWeights& w);

/// t_start ~ U[0, 1 − α], t_end = t_start + α.
EventWindow sample_event_window(double alpha, Rng& rng);

/// Deterministic pairwise sum.
double pairwise_sum(std::span<const double> v);

// ---------------------------------------------------------------------------
// Tape versions used by training.

template <typename S>
ad::Var<S> luminance(const ad::Var<S>& rgb) {
  ad::Matrix<S> w(3, 1);
  w << static_cast<S>(kLumaR), static_cast<S>(kLumaG), static_cast<S>(kLumaB);
  return ad::matmul(rgb, rgb.tape()->constant(w));
}

/// Column of log-brightness differences normalized over the batch.
template <typename S>
ad::Var<S> synth_event_batch(const ad::Var<S>& rgb_start, const ad::Var<S>& rgb_end) {
  const ad::Var<S> diff =
      ad::log_guarded(luminance(rgb_end), kLogEpsilon) - ad::log_guarded(luminance(rgb_start), kLogEpsilon);
  if (static_cast<double>(diff.value().norm()) < kZeroNormThreshold) {
    throw ZeroNorm("synthesized event batch has zero norm");
  }
  return diff / ad::norm(diff);
}

template <typename S>
ad::Var<S> total_loss(const ad::Var<S>& blur_pred, const ad::Matrix<S>& blur_meas, const ad::Var<S>* event_pred,
                      const ad::Matrix<S>* event_meas, const LossWeights& w) {
  if (blur_pred.rows() != blur_meas.rows() || blur_pred.cols() != blur_meas.cols()) {
    throw ShapeMismatch("blur prediction and measurement differ in shape");
  }
  ad::Tape<S>* tape = blur_pred.tape();
  ad::Var<S> loss = ad::mean(ad::square(blur_pred - tape->constant(blur_meas)));
  if (event_pred && w.beta != 0.0) {
    if (event_pred->rows() != event_meas->rows() || event_pred->cols() != event_meas->cols()) {
      throw ShapeMismatch("event prediction and measurement differ in shape");
    }
    loss = loss + w.beta * ad::mean(ad::square(*event_pred - tape->constant(*event_meas)));
  }
  return loss;
}

}  // namespace evdeblur
