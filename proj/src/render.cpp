#include "evdeblur/render.hpp"

#include <cmath>
#include <string>

namespace evdeblur {

void RenderSettings::validate() const {
  if (n_samples < 2) throw ValidationError("n_samples must be >= 2, got " + std::to_string(n_samples));
  if (!(near < far)) throw ValidationError("near must be < far");
}

SampleDepths sample_depths(const RenderSettings& settings, Rng* rng) {
  const int n = settings.n_samples;
  const double bin = (settings.far - settings.near) / n;
  SampleDepths s;
  s.t.resize(n);
  s.delta.resize(n);
  for (int i = 0; i < n; ++i) {
    const double offset = (settings.stratified && rng) ? rng->uniform() : 0.5;
    s.t[i] = settings.near + (i + offset) * bin;
  }
  for (int i = 0; i + 1 < n; ++i) s.delta[i] = s.t[i + 1] - s.t[i];
  s.delta[n - 1] = settings.far - s.t[n - 1];
  return s;
}

CompositeResult composite(std::span<const double> sigma, std::span<const double> delta,
                          std::span<const Eigen::Vector3d> colors, bool white_background) {
  CompositeResult out;
  const std::size_t n = sigma.size();
  out.transmittance.resize(n);
  out.weights.resize(n);
  double optical_depth = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double T = std::exp(-optical_depth);
    const double sd = sigma[i] * delta[i];
    out.transmittance[i] = T;
    out.weights[i] = T * (1.0 - std::exp(-sd));
    out.rgb += out.weights[i] * colors[i];
    optical_depth += sd;
  }
  out.residual_transmittance = std::exp(-optical_depth);
  if (white_background) out.rgb += Eigen::Vector3d::Constant(out.residual_transmittance);
  return out;
}

Rng pixel_stream(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer to decorrelate neighbouring streams
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

template <typename S>
Eigen::Vector3d render_ray(const FieldView<S>& field, const Ray& ray, const RenderSettings& settings, Rng* rng) {
  const SampleDepths depths = sample_depths(settings, rng);
  const int n = settings.n_samples;
  detail::RowMatrix<S> points(n, 3);
  detail::RowMatrix<S> dirs(n, 3);
  for (int i = 0; i < n; ++i) {
    points.row(i) = (ray.origin + depths.t[i] * ray.dir).transpose().cast<S>();
    dirs.row(i) = ray.dir.transpose().cast<S>();
  }
  Eigen::Matrix<S, Eigen::Dynamic, 1> sigma;
  detail::RowMatrix<S> color;
  detail::mlp_forward(field, points, dirs, sigma, color);

  std::vector<double> sig(n);
  std::vector<Eigen::Vector3d> cols(n);
  for (int i = 0; i < n; ++i) {
    sig[i] = static_cast<double>(sigma[i]);
    cols[i] = color.row(i).transpose().template cast<double>();
  }
  return composite(sig, depths.delta, cols, settings.white_background).rgb;
}

template <typename S>
Image render_image(const FieldView<S>& field, const RigidTransform& pose, const CameraIntrinsics& K,
                   const RenderSettings& settings, std::uint64_t seed) {
  settings.validate();
  Image img(K.width, K.height, 3);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      Rng rng = pixel_stream(seed, static_cast<std::uint64_t>(y) * K.width + x);
      const Eigen::Vector3d rgb = render_ray(field, make_ray(x, y, pose, K), settings, &rng);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(rgb[c]);
    }
  }
  return img;
}

template Eigen::Vector3d render_ray(const FieldView<float>&, const Ray&, const RenderSettings&, Rng*);
template Eigen::Vector3d render_ray(const FieldView<double>&, const Ray&, const RenderSettings&, Rng*);
template Image render_image(const FieldView<float>&, const RigidTransform&, const CameraIntrinsics&,
                            const RenderSettings&, std::uint64_t);
template Image render_image(const FieldView<double>&, const RigidTransform&, const CameraIntrinsics&,
                            const RenderSettings&, std::uint64_t);

}  // namespace evdeblur
