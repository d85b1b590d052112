#include "evdeblur/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "evdeblur/errors.hpp"
#include "evdeblur/rng.hpp"

namespace evdeblur {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const Eigen::Vector3d kBackground = Eigen::Vector3d::Constant(0.5);

struct Box {
  Eigen::Vector3d lo, hi;
};

// Slab test; returns entry/exit distances and the axis of each.
bool slabs(const Ray& r, const Box& b, double& t_in, int& axis_in, double& t_out, int& axis_out) {
  t_in = -kInf;
  t_out = kInf;
  axis_in = axis_out = 0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(r.dir[a]) < 1e-15) {
      if (r.origin[a] < b.lo[a] || r.origin[a] > b.hi[a]) return false;
      continue;
    }
    double t0 = (b.lo[a] - r.origin[a]) / r.dir[a];
    double t1 = (b.hi[a] - r.origin[a]) / r.dir[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_in) {
      t_in = t0;
      axis_in = a;
    }
    if (t1 < t_out) {
      t_out = t1;
      axis_out = a;
    }
  }
  return t_in <= t_out;
}

Eigen::Vector2d face_uv(const Eigen::Vector3d& p, int axis) {
  switch (axis) {
    case 0: return {p.z(), p.y()};
    case 1: return {p.x(), p.z()};
    default: return {p.x(), p.y()};
  }
}

}  // namespace

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::kTexturedPlane: return "textured-plane";
    case SceneKind::kVoxelBoxRoom: return "voxel-box-room";
    case SceneKind::kAnalyticSpheres: return "analytic-spheres";
  }
  return "textured-plane";
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "textured-plane") return SceneKind::kTexturedPlane;
  if (s == "voxel-box-room") return SceneKind::kVoxelBoxRoom;
  if (s == "analytic-spheres") return SceneKind::kAnalyticSpheres;
  throw ConfigError("unknown scene kind '" + s + "' (expected textured-plane|voxel-box-room|analytic-spheres)");
}

Texture Texture::random(std::uint64_t seed, int count, double k_min, double k_max, double sharpness) {
  Rng rng(seed);
  Texture tex;
  tex.sharpness = sharpness;
  Eigen::Vector3d power = Eigen::Vector3d::Zero();
  for (int i = 0; i < count; ++i) {
    Wave w;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double k = rng.uniform(k_min, k_max);
    w.k = k * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // shared gray component plus a smaller chroma part
    const double gray = rng.uniform(0.3, 1.0);
    for (int c = 0; c < 3; ++c) w.amplitude[c] = gray + rng.uniform(-0.3, 0.3);
    power += 0.5 * w.amplitude.cwiseAbs2();
    tex.waves.push_back(w);
  }
  // unit RMS per channel before the tanh stretch
  for (auto& w : tex.waves) w.amplitude = w.amplitude.cwiseQuotient(power.cwiseSqrt().cwiseMax(1e-12));
  return tex;
}

Eigen::Vector3d Texture::at(const Eigen::Vector2d& uv) const {
  Eigen::Vector3d raw = Eigen::Vector3d::Zero();
  for (const auto& w : waves) raw += w.amplitude * std::sin(w.k.dot(uv) + w.phase);
  return base + 0.4 * (sharpness * raw).array().tanh().matrix();
}

void SceneParams::validate() const {
  if (!(plane_depth > 0.0)) throw ValidationError("plane_depth must be positive");
  if (texture_waves < 1) throw ValidationError("texture_waves must be >= 1");
  if (!(texture_sharpness > 0.0)) throw ValidationError("texture_sharpness must be positive");
  if (!(texture_k_min > 0.0 && texture_k_min <= texture_k_max)) {
    throw ValidationError("texture frequencies need 0 < k_min <= k_max");
  }
}

GroundTruthScene::GroundTruthScene(const SceneParams& params) : params_(params) {
  params_.validate();
  texture_ = Texture::random(params.texture_seed, params.texture_waves, params.texture_k_min, params.texture_k_max,
                               params.texture_sharpness);
  secondary_ = Texture::random(params.texture_seed + 0x5eed, params.texture_waves, params.texture_k_min,
                               params.texture_k_max, params.texture_sharpness);
}

double GroundTruthScene::reference_depth() const { return params_.plane_depth; }

GroundTruthScene::Hit GroundTruthScene::intersect(const Ray& ray) const {
  const double D = params_.plane_depth;
  Hit best{kInf, kBackground};

  if (params_.kind == SceneKind::kVoxelBoxRoom) {
    const Box room{{-3.0, -3.0, -2.0}, {3.0, 3.0, D + 2.0}};
    double t_in, t_out;
    int a_in, a_out;
    if (slabs(ray, room, t_in, a_in, t_out, a_out) && t_out > 0.0) {
      const Eigen::Vector3d p = ray.origin + t_out * ray.dir;
      const Eigen::Vector2d offset(7.3 * a_out, (ray.dir[a_out] > 0 ? 3.1 : -3.1));
      best = {t_out, texture_.at(face_uv(p, a_out) + offset)};
    }
    const Box cube{{-0.6, -0.6, D - 1.6}, {0.6, 0.6, D - 0.4}};
    if (slabs(ray, cube, t_in, a_in, t_out, a_out) && t_in > 0.0 && t_in < best.t) {
      const Eigen::Vector3d p = ray.origin + t_in * ray.dir;
      best = {t_in, secondary_.at(2.0 * face_uv(p, a_in))};
    }
    return best;
  }

  if (ray.dir.z() > 1e-12) {
    const double t = (D - ray.origin.z()) / ray.dir.z();
    if (t > 0.0) {
      const Eigen::Vector3d p = ray.origin + t * ray.dir;
      best = {t, texture_.at(p.head<2>())};
    }
  }
  if (params_.kind == SceneKind::kAnalyticSpheres) {
    struct Sphere {
      Eigen::Vector3d c;
      double r;
    };
    const Sphere spheres[] = {
        {{-0.8, -0.3, D - 1.2}, 0.5}, {{0.9, 0.5, D - 0.8}, 0.6}, {{0.0, 0.9, D - 1.8}, 0.35}};
    for (const auto& s : spheres) {
      const Eigen::Vector3d oc = ray.origin - s.c;
      const double b = oc.dot(ray.dir);
      const double disc = b * b - (oc.squaredNorm() - s.r * s.r);
      if (disc < 0.0) continue;
      const double t = -b - std::sqrt(disc);
      if (t > 0.0 && t < best.t) {
        const Eigen::Vector3d n = (ray.origin + t * ray.dir - s.c) / s.r;
        best = {t, secondary_.at(3.0 * n.head<2>() + 5.0 * s.c.head<2>())};
      }
    }
  }
  return best;
}

Eigen::Vector3d GroundTruthScene::radiance(const Ray& ray) const {
  return intersect(ray).color.cwiseMax(0.05).cwiseMin(0.95);
}

double GroundTruthScene::hit_distance(const Ray& ray) const { return intersect(ray).t; }

}  // namespace evdeblur
