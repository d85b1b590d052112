#pragma once

// Procedural ground-truth scenes rendered analytically by ray casting.
// All radiance is linear and inside [0.05, 0.95].

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "evdeblur/camera.hpp"

namespace evdeblur {

enum class SceneKind { kTexturedPlane, kVoxelBoxRoom, kAnalyticSpheres };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& s);

/// Random colored sinusoids summed to unit RMS, then contrast-stretched:
/// base + 0.4·tanh(sharpness·Σ aᵢ sin(kᵢ·uv + φᵢ)).
struct Texture {
  struct Wave {
    Eigen::Vector2d k;
    double phase = 0.0;
    Eigen::Vector3d amplitude;
  };
  Eigen::Vector3d base = Eigen::Vector3d::Constant(0.5);
  double sharpness = 1.0;
  std::vector<Wave> waves;

  /// `count` waves with |k| uniform in [k_min, k_max].
  static Texture random(std::uint64_t seed, int count, double k_min, double k_max, double sharpness);
  Eigen::Vector3d at(const Eigen::Vector2d& uv) const;
};

struct SceneParams {
  SceneKind kind = SceneKind::kTexturedPlane;
  double plane_depth = 4.0;
  std::uint64_t texture_seed = 1;
  int texture_waves = 12;
  double texture_k_min = 1.5;
  double texture_k_max = 8.0;
  double texture_sharpness = 3.0;

  void validate() const;
};

class GroundTruthScene {
 public:
  explicit GroundTruthScene(const SceneParams& params);

  const SceneParams& params() const { return params_; }
  Eigen::Vector3d radiance(const Ray& ray) const;
  /// Distance along the ray to the first surface, +inf on a miss.
  double hit_distance(const Ray& ray) const;
  /// Depth of the main surface seen from the origin along +z.
  double reference_depth() const;

 private:
  struct Hit {
    double t;
    Eigen::Vector3d color;
  };
  Hit intersect(const Ray& ray) const;

  SceneParams params_;
  Texture texture_;
  Texture secondary_;
};

}  // namespace evdeblur
