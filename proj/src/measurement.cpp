#include "evdeblur/measurement.hpp"

#include <cmath>
#include <string>

namespace evdeblur {

void BlurModel::validate() const {
  if (n_virtual < 2) throw ValidationError("n_virtual must be >= 2, got " + std::to_string(n_virtual));
}

std::vector<double> BlurModel::times() const {
  validate();
  std::vector<double> t(n_virtual);
  for (int i = 0; i < n_virtual; ++i) t[i] = static_cast<double>(i) / (n_virtual - 1);
  t.back() = 1.0;
  return t;
}

void LossWeights::validate() const {
  if (!(std::isfinite(beta) && beta >= 0.0)) throw ValidationError("beta must be finite and >= 0");
}

Eigen::Vector3d synth_blur_pixel(const RayRenderer& render, const Trajectory& traj, const CameraIntrinsics& K,
                                 const Eigen::Vector2d& pixel, const BlurModel& model) {
  const std::vector<double> times = model.times();
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (double t : times) acc += render(make_ray(pixel.x(), pixel.y(), traj.pose_at(t), K));
  return acc / static_cast<double>(times.size());
}

Eigen::Vector3d synth_blur_pixel(const SceneField& field, const Trajectory& traj, const CameraIntrinsics& K,
                                 const Eigen::Vector2d& pixel, const BlurModel& model,
                                 const RenderSettings& settings) {
  return synth_blur_pixel([&](const Ray& r) { return render_ray(field, r, settings); }, traj, K, pixel, model);
}

std::vector<double> accumulate_events(const EventStream& stream, const EventWindow& window, double C,
                                      std::span<const Eigen::Vector2i> pixels) {
  std::vector<int> sums(static_cast<std::size_t>(stream.width) * stream.height, 0);
  for (const Event& e : stream.events) {
    if (e.t > window.t_start && e.t < window.t_end) sums[static_cast<std::size_t>(e.y) * stream.width + e.x] += e.p;
  }
  std::vector<double> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) out.push_back(C * sums[static_cast<std::size_t>(p.y()) * stream.width + p.x()]);
  return out;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

std::vector<double> normalize_event_image(std::span<const double> E) {
  std::vector<double> sq(E.size());
  for (std::size_t i = 0; i < E.size(); ++i) sq[i] = E[i] * E[i];
  const double n = std::sqrt(pairwise_sum(sq));
  if (n < kZeroNormThreshold) throw ZeroNorm("accumulated event image has zero norm over the batch");
  std::vector<double> out(E.begin(), E.end());
  for (double& x : out) x /= n;
  return out;
}

double synth_event_pixel(const RayRenderer& render, const Trajectory& traj, const CameraIntrinsics& K,
                         const Eigen::Vector2d& pixel, const EventWindow& window) {
  const double g0 = luminance(render(make_ray(pixel.x(), pixel.y(), traj.pose_at(window.t_start), K)));
  const double g1 = luminance(render(make_ray(pixel.x(), pixel.y(), traj.pose_at(window.t_end), K)));
  return std::log(g1 + kLogEpsilon) - std::log(g0 + kLogEpsilon);
}

double synth_event_pixel(const SceneField& field, const Trajectory& traj, const CameraIntrinsics& K,
                         const Eigen::Vector2d& pixel, const EventWindow& window, const RenderSettings& settings) {
  return synth_event_pixel([&](const Ray& r) { return render_ray(field, r, settings); }, traj, K, pixel, window);
}

double total_loss(const Eigen::MatrixXd& blur_pred, const Eigen::MatrixXd& blur_meas,
                  std::span<const double> event_pred_normalized, std::span<const double> event_meas_normalized,
                  const LossWeights& w) {
  if (blur_pred.rows() != blur_meas.rows() || blur_pred.cols() != blur_meas.cols()) {
    throw ShapeMismatch("blur prediction and measurement differ in shape");
  }
  if (event_pred_normalized.size() != event_meas_normalized.size()) {
    throw ShapeMismatch("event prediction and measurement differ in length");
  }
  w.validate();
  std::vector<double> sq(blur_pred.size());
  for (Eigen::Index i = 0; i < blur_pred.size(); ++i) {
    const double d = blur_pred.data()[i] - blur_meas.data()[i];
    sq[i] = d * d;
  }
  double loss = sq.empty() ? 0.0 : pairwise_sum(sq) / static_cast<double>(sq.size());
  if (w.beta != 0.0 && !event_pred_normalized.empty()) {
    std::vector<double> se(event_pred_normalized.size());
    for (std::size_t i = 0; i < se.size(); ++i) {
      const double d = event_pred_normalized[i] - event_meas_normalized[i];
      se[i] = d * d;
    }
    loss += w.beta * pairwise_sum(se) / static_cast<double>(se.size());
  }
  return loss;
}

EventWindow sample_event_window(double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in (0, 1], got " + std::to_string(alpha));
  EventWindow w;
  w.t_start = (1.0 - alpha) * rng.uniform();
  w.t_end = std::min(1.0, w.t_start + alpha);
  return w;
}

}  // namespace evdeblur
