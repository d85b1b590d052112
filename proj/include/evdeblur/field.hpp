#pragma once

// Radiance field: positional encoding followed by an MLP that maps a world
// point and view direction to color in [0,1]³ (sigmoid) and density ≥ 0
// (softplus).
//
// Parameter layout in the flat vector, all matrices row-major (in × out):
//   for each hidden layer: W, b
//   density head: W (width × 1), b (1)
//   color head:   W ((width + dir_encoding) × 3), b (3)
// The view-direction encoding enters only the color head.

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evdeblur/errors.hpp"

namespace evdeblur {

enum class Activation { kRelu, kSoftplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct FieldArch {
  int pe_levels_pos = 6;
  int pe_levels_dir = 2;
  int hidden_layers = 4;
  int hidden_width = 128;
  Activation hidden_activation = Activation::kRelu;

  int position_encoding_size() const { return 3 + 6 * pe_levels_pos; }
  int direction_encoding_size() const { return 3 + 6 * pe_levels_dir; }
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const FieldArch&) const = default;
};

/// Offsets of each weight block in the flat parameter vector.
struct ParamBlock {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct FieldLayout {
  std::vector<ParamBlock> hidden_weights;
  std::vector<ParamBlock> hidden_biases;
  ParamBlock density_weight, density_bias;
  ParamBlock color_weight, color_bias;
  std::size_t total = 0;

  static FieldLayout of(const FieldArch& arch);
};

/// Non-owning view of a field in a given scalar precision.
template <typename S>
struct FieldView {
  const FieldArch& arch;
  std::span<const S> params;
};

/// Field with float32 parameter storage (the checkpoint precision).
class SceneField {
 public:
  SceneField(FieldArch arch, std::vector<float> params);

  /// Kaiming-style uniform init (bound √(6/fan_in) for hidden layers,
  /// 1/√fan_in for the heads), zero biases.
  static SceneField initialize(const FieldArch& arch, std::uint64_t seed);

  const FieldArch& arch() const { return arch_; }
  const std::vector<float>& params() const { return params_; }
  std::vector<float>& mutable_params() { return params_; }
  FieldView<float> view() const { return {arch_, params_}; }

 private:
  FieldArch arch_;
  std::vector<float> params_;
};

/// [v, sin(2⁰πv), cos(2⁰πv), …, sin(2^{L-1}πv), cos(2^{L-1}πv)], length 3 + 6L.
Eigen::VectorXd positional_encode(const Eigen::Vector3d& v, int levels);

struct FieldSample {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double sigma = 0.0;
};

template <typename S>
FieldSample field_eval(const FieldView<S>& field, const Eigen::Vector3d& x, const Eigen::Vector3d& d);

inline FieldSample field_eval(const SceneField& field, const Eigen::Vector3d& x, const Eigen::Vector3d& d) {
  return field_eval(field.view(), x, d);
}

namespace detail {

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Batched plain forward pass: rows of `points` with matching rows of
/// `dirs`; writes sigma (n) and color (n × 3). Fixed evaluation order for a
/// given batch shape, so results are reproducible call to call.
template <typename S>
void mlp_forward(const FieldView<S>& field, const RowMatrix<S>& points, const RowMatrix<S>& dirs,
                 Eigen::Matrix<S, Eigen::Dynamic, 1>& sigma, RowMatrix<S>& color);

template <typename S>
RowMatrix<S> encode_rows(const RowMatrix<S>& v, int levels);

}  // namespace detail

}  // namespace evdeblur
