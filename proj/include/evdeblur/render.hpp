#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evdeblur/camera.hpp"
#include "evdeblur/field.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/rng.hpp"

namespace evdeblur {

struct RenderSettings {
  int n_samples = 64;
  double near = 2.0;
  double far = 6.0;
  bool stratified = false;
  bool white_background = false;

  void validate() const;
};

/// Sample distances along a ray and the interval after each one. Bin
/// midpoints, or one uniform draw per equal bin when stratified. The last
/// interval runs to `far`.
struct SampleDepths {
  std::vector<double> t;
  std::vector<double> delta;
};

SampleDepths sample_depths(const RenderSettings& settings, Rng* rng);

/// Alpha compositing of per-sample density and color.
struct CompositeResult {
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  std::vector<double> transmittance;  // T_i for each sample
  std::vector<double> weights;        // T_i (1 - exp(-σ_i δ_i))
  double residual_transmittance = 1.0;  // T_{n+1}
};

CompositeResult composite(std::span<const double> sigma, std::span<const double> delta,
                          std::span<const Eigen::Vector3d> colors, bool white_background);

/// `rng` is only consulted when settings.stratified is set.
template <typename S>
Eigen::Vector3d render_ray(const FieldView<S>& field, const Ray& ray, const RenderSettings& settings, Rng* rng);

inline Eigen::Vector3d render_ray(const SceneField& field, const Ray& ray, const RenderSettings& settings,
                                  Rng* rng = nullptr) {
  return render_ray(field.view(), ray, settings, rng);
}

/// Per-ray random stream for pixel `index` under a global seed.
Rng pixel_stream(std::uint64_t seed, std::uint64_t index);

/// Renders every pixel with render_ray; stratified sampling draws from
/// pixel_stream(seed, y * width + x).
template <typename S>
Image render_image(const FieldView<S>& field, const RigidTransform& pose, const CameraIntrinsics& K,
                   const RenderSettings& settings, std::uint64_t seed = 0);

inline Image render_image(const SceneField& field, const RigidTransform& pose, const CameraIntrinsics& K,
                          const RenderSettings& settings, std::uint64_t seed = 0) {
  return render_image(field.view(), pose, K, settings, seed);
}

}  // namespace evdeblur
