#include "evdeblur/metrics.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "evdeblur/errors.hpp"
#include "evdeblur/measurement.hpp"

namespace evdeblur {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gray(const Image& img) {
  std::vector<double> g(img.pixel_count());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      if (img.channels >= 3) {
        g[i] = luminance(Eigen::Vector3d(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)));
      } else {
        g[i] = img.at(x, y, 0);
      }
    }
  }
  return g;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("psnr: images differ in shape");
  std::vector<double> sq(a.data.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sq[i] = d * d;
  }
  const double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("ssim: images differ in shape");
  if (a.width < kWindow || a.height < kWindow) {
    throw ImageTooSmall("ssim needs at least " + std::to_string(kWindow) + "x" + std::to_string(kWindow) +
                        " pixels, got " + std::to_string(a.width) + "x" + std::to_string(a.height));
  }
  double w[kWindow][kWindow];
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    for (int j = 0; j < kWindow; ++j) {
      const double dy = i - kWindow / 2, dx = j - kWindow / 2;
      w[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
      total += w[i][j];
    }
  }
  for (auto& row : w) {
    for (double& v : row) v /= total;
  }
  const std::vector<double> ga = gray(a), gb = gray(b);
  std::vector<double> per_window;
  for (int y0 = 0; y0 + kWindow <= a.height; ++y0) {
    for (int x0 = 0; x0 + kWindow <= a.width; ++x0) {
      double ma = 0, mb = 0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const std::size_t k = static_cast<std::size_t>(y0 + i) * a.width + x0 + j;
          ma += w[i][j] * ga[k];
          mb += w[i][j] * gb[k];
        }
      }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const std::size_t k = static_cast<std::size_t>(y0 + i) * a.width + x0 + j;
          const double da = ga[k] - ma, db = gb[k] - mb;
          va += w[i][j] * da * da;
          vb += w[i][j] * db * db;
          cov += w[i][j] * da * db;
        }
      }
      per_window.push_back(((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2)));
    }
  }
  return pairwise_sum(per_window) / static_cast<double>(per_window.size());
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  std::ostringstream os;
  os.precision(6);
  os << db;
  return os.str();
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "metric,frame,value\n";
  for (const auto& r : rows) {
    os << r.metric << ',' << r.frame << ',';
    if (std::isinf(r.value)) {
      os << "inf";
    } else {
      os << r.value;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace evdeblur

namespace evdeblur {

RigidTransform GaugeAlignment::apply(const RigidTransform& pose) const {
  RigidTransform out;
  out.rotation = rotation * pose.rotation;
  out.translation = scale * (rotation * pose.translation) + translation;
  return out;
}

GaugeAlignment align_gauge(std::span<const RigidTransform> gt, std::span<const RigidTransform> est) {
  if (gt.size() != est.size() || gt.empty()) throw ShapeMismatch("gauge alignment needs matching non-empty samples");
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < gt.size(); ++i) M += gt[i].rotation * est[i].rotation.transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) D(2, 2) = -1;
  GaugeAlignment a;
  a.rotation = svd.matrixU() * D * svd.matrixV().transpose();

  Eigen::Vector3d g_mean = Eigen::Vector3d::Zero(), e_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    g_mean += gt[i].translation;
    e_mean += est[i].translation;
  }
  g_mean /= static_cast<double>(gt.size());
  e_mean /= static_cast<double>(gt.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Eigen::Vector3d re = a.rotation * (est[i].translation - e_mean);
    num += (gt[i].translation - g_mean).dot(re);
    den += re.squaredNorm();
  }
  a.scale = den > 1e-300 ? std::max(0.0, num / den) : 1.0;
  a.translation = g_mean - a.scale * (a.rotation * e_mean);
  return a;
}

TrajectoryError trajectory_error(std::span<const RigidTransform> gt, std::span<const RigidTransform> est) {
  TrajectoryError err;
  err.alignment = align_gauge(gt, est);
  double sr = 0.0, st = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const RigidTransform e = err.alignment.apply(est[i]);
    const double r = rotation_angle_between(gt[i].rotation, e.rotation) * 180.0 / std::numbers::pi;
    const double t = (gt[i].translation - e.translation).norm();
    err.rotation_deg.push_back(r);
    err.translation.push_back(t);
    sr += r * r;
    st += t * t;
  }
  err.rotation_rmse_deg = std::sqrt(sr / static_cast<double>(gt.size()));
  err.translation_rmse = std::sqrt(st / static_cast<double>(gt.size()));
  return err;
}

}  // namespace evdeblur
