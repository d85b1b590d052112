#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "evdeblur/image.hpp"
#include "evdeblur/lie.hpp"

namespace evdeblur {

/// −10·log10(MSE) over all channels; +inf for identical images.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over valid 11×11 windows (Gaussian σ = 1.5, K1 = 0.01,
/// K2 = 0.03, L = 1). Color inputs are converted to luminance first.
double ssim(const Image& a, const Image& b);

/// Formats a PSNR value, "inf" for the identical-image sentinel.
std::string format_psnr(double db);

struct MetricRow {
  std::string metric;
  std::string frame;
  double value = 0.0;
};

/// "metric,frame,value" CSV with a header line.
std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Similarity transform x ↦ s·R·x + t taking estimated world coordinates to
/// ground-truth ones.
struct GaugeAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  RigidTransform apply(const RigidTransform& pose) const;
};

/// Rotation is the chordal mean of R_gt·R_estᵀ; scale and translation then
/// fit the camera centers by least squares (scale clamped at 0).
GaugeAlignment align_gauge(std::span<const RigidTransform> gt, std::span<const RigidTransform> est);

struct TrajectoryError {
  GaugeAlignment alignment;
  std::vector<double> rotation_deg;  // per sample, geodesic
  std::vector<double> translation;   // per sample, center distance
  double rotation_rmse_deg = 0.0;
  double translation_rmse = 0.0;
};

/// Errors of `est` against `gt` (same sample times) after gauge alignment.
TrajectoryError trajectory_error(std::span<const RigidTransform> gt, std::span<const RigidTransform> est);

}  // namespace evdeblur
