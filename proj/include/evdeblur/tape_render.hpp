#pragma once

// Batched volume rendering recorded on an autodiff tape. Gradients flow to
// the field parameters and to the camera poses of every render group.

#include <Eigen/Core>
#include <numbers>
#include <span>
#include <vector>

#include "evdeblur/autodiff.hpp"
#include "evdeblur/field.hpp"
#include "evdeblur/lie.hpp"
#include "evdeblur/render.hpp"

namespace evdeblur {

template <typename S>
struct FieldVars {
  FieldArch arch;
  std::vector<ad::Var<S>> hidden_w, hidden_b;
  ad::Var<S> density_w, density_b, color_w, color_b;
};

template <typename S>
FieldVars<S> field_variables(ad::Tape<S>& tape, const FieldArch& arch, std::span<const S> params) {
  const FieldLayout layout = FieldLayout::of(arch);
  if (params.size() != layout.total) throw ShapeMismatch("parameter vector does not match architecture");
  auto leaf = [&](const ParamBlock& b) {
    return tape.variable(Eigen::Map<const ad::Matrix<S>>(params.data() + b.offset, b.rows, b.cols));
  };
  FieldVars<S> f;
  f.arch = arch;
  for (int l = 0; l < arch.hidden_layers; ++l) {
    f.hidden_w.push_back(leaf(layout.hidden_weights[l]));
    f.hidden_b.push_back(leaf(layout.hidden_biases[l]));
  }
  f.density_w = leaf(layout.density_weight);
  f.density_b = leaf(layout.density_bias);
  f.color_w = leaf(layout.color_weight);
  f.color_b = leaf(layout.color_bias);
  return f;
}

/// Writes the gradient of the last backward pass into a flat vector laid out
/// like the parameters.
template <typename S>
void field_gradient(const ad::Tape<S>& tape, const FieldVars<S>& f, std::span<S> out) {
  const FieldLayout layout = FieldLayout::of(f.arch);
  if (out.size() != layout.total) throw ShapeMismatch("gradient buffer does not match architecture");
  auto put = [&](const ParamBlock& b, const ad::Var<S>& v) {
    Eigen::Map<ad::Matrix<S>>(out.data() + b.offset, b.rows, b.cols) = tape.grad(v);
  };
  for (int l = 0; l < f.arch.hidden_layers; ++l) {
    put(layout.hidden_weights[l], f.hidden_w[l]);
    put(layout.hidden_biases[l], f.hidden_b[l]);
  }
  put(layout.density_weight, f.density_w);
  put(layout.density_bias, f.density_b);
  put(layout.color_weight, f.color_w);
  put(layout.color_bias, f.color_b);
}

template <typename S>
ad::Var<S> encode_var(const ad::Var<S>& v, int levels) {
  std::vector<ad::Var<S>> parts{v};
  for (int k = 0; k < levels; ++k) {
    const ad::Var<S> scaled = v * std::ldexp(std::numbers::pi, k);
    parts.push_back(ad::sin(scaled));
    parts.push_back(ad::cos(scaled));
  }
  return ad::concat_cols(parts);
}

template <typename S>
struct FieldOutput {
  ad::Var<S> sigma;  // n × 1
  ad::Var<S> color;  // n × 3
};

template <typename S>
FieldOutput<S> field_forward(const FieldVars<S>& f, const ad::Var<S>& points, const ad::Var<S>& dirs) {
  ad::Var<S> h = encode_var(points, f.arch.pe_levels_pos);
  for (int l = 0; l < f.arch.hidden_layers; ++l) {
    const ad::Var<S> z = ad::matmul(h, f.hidden_w[l]) + f.hidden_b[l];
    h = f.arch.hidden_activation == Activation::kRelu ? ad::relu(z) : ad::softplus(z);
  }
  FieldOutput<S> out;
  out.sigma = ad::softplus(ad::matmul(h, f.density_w) + f.density_b);
  const ad::Var<S> hc = ad::concat_cols<S>({h, encode_var(dirs, f.arch.pe_levels_dir)});
  out.color = ad::sigmoid(ad::matmul(hc, f.color_w) + f.color_b);
  return out;
}

/// Camera pose on the tape: transposed rotation (3×3) and center (1×3).
template <typename S>
struct TapePose {
  ad::Var<S> rotation_t;
  ad::Var<S> translation;
};

/// Pose as gradient leaves.
template <typename S>
TapePose<S> pose_variables(ad::Tape<S>& tape, const RigidTransform& pose) {
  const ad::Matrix<S> rt = pose.rotation.transpose().cast<S>();
  const ad::Matrix<S> t = pose.translation.transpose().cast<S>();
  return {tape.variable(rt), tape.variable(t)};
}

/// Pose computed on the tape by the generic Lie code.
template <typename S>
TapePose<S> pose_from_generic(const lie::Pose<ad::Var<S>>& p) {
  const std::vector<ad::Var<S>> rt{p.R[0], p.R[3], p.R[6], p.R[1], p.R[4], p.R[7], p.R[2], p.R[5], p.R[8]};
  return {ad::stack(rt, 3, 3), ad::stack(std::vector<ad::Var<S>>{p.t[0], p.t[1], p.t[2]}, 1, 3)};
}

/// Pixels rendered from one pose.
struct RenderGroup {
  std::vector<Eigen::Vector2d> pixels;
};

/// Renders all groups in a single field evaluation. Returns (Σ pixels) × 3
/// in group order. Stratified depths draw from `rng` ray by ray.
template <typename S>
ad::Var<S> render_groups(const FieldVars<S>& field, std::span<const TapePose<S>> poses,
                         std::span<const RenderGroup> groups, const CameraIntrinsics& K,
                         const RenderSettings& settings, Rng* rng) {
  if (poses.size() != groups.size()) throw ShapeMismatch("render_groups: one pose per group");
  settings.validate();
  ad::Tape<S>* tape = poses.front().translation.tape();
  const int ns = settings.n_samples;
  std::vector<ad::Var<S>> points, dirs;
  Eigen::Index total_rays = 0;
  for (const auto& g : groups) total_rays += static_cast<Eigen::Index>(g.pixels.size());
  ad::Matrix<S> delta(total_rays * ns, 1);
  Eigen::Index row = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& px = groups[gi].pixels;
    const Eigen::Index m = static_cast<Eigen::Index>(px.size());
    if (m == 0) continue;
    ad::Matrix<S> cam(m, 3);
    ad::Matrix<S> tv(m * ns, 1);
    for (Eigen::Index r = 0; r < m; ++r) {
      cam.row(r) = K.camera_direction(px[r].x(), px[r].y()).transpose().cast<S>();
      const SampleDepths d = sample_depths(settings, rng);
      for (int i = 0; i < ns; ++i) {
        tv(r * ns + i, 0) = static_cast<S>(d.t[i]);
        delta(row + r * ns + i, 0) = static_cast<S>(d.delta[i]);
      }
    }
    row += m * ns;
    const ad::Var<S> world_dirs = ad::repeat_rows(ad::matmul(tape->constant(cam), poses[gi].rotation_t), ns);
    points.push_back(poses[gi].translation + tape->constant(tv) * world_dirs);
    dirs.push_back(world_dirs);
  }
  const FieldOutput<S> fo = field_forward(field, ad::concat_rows(points), ad::concat_rows(dirs));
  const ad::Var<S> sd = fo.sigma * tape->constant(delta);
  const ad::Var<S> trans = ad::exp(-ad::segment_exclusive_cumsum(sd, ns));
  const ad::Var<S> weights = trans * (1.0 - ad::exp(-sd));
  ad::Var<S> rgb = ad::segment_sum(weights * fo.color, ns);
  if (settings.white_background) rgb = rgb + ad::exp(-ad::segment_sum(sd, ns));
  return rgb;
}

}  // namespace evdeblur
