#include "evdeblur/field.hpp"

#include <cmath>
#include <numbers>

#include "evdeblur/autodiff.hpp"
#include "evdeblur/rng.hpp"

namespace evdeblur {

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "softplus"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "softplus") return Activation::kSoftplus;
  throw ConfigError("unknown activation '" + s + "' (expected relu|softplus)");
}

void FieldArch::validate() const {
  if (pe_levels_pos < 0 || pe_levels_dir < 0) throw ValidationError("encoding levels must be >= 0");
  if (hidden_layers < 1 || hidden_width < 1) throw ValidationError("need at least one hidden layer of width >= 1");
}

FieldLayout FieldLayout::of(const FieldArch& arch) {
  FieldLayout layout;
  std::size_t off = 0;
  auto take = [&off](int rows, int cols) {
    ParamBlock b{off, rows, cols};
    off += b.size();
    return b;
  };
  int in = arch.position_encoding_size();
  for (int l = 0; l < arch.hidden_layers; ++l) {
    layout.hidden_weights.push_back(take(in, arch.hidden_width));
    layout.hidden_biases.push_back(take(1, arch.hidden_width));
    in = arch.hidden_width;
  }
  layout.density_weight = take(arch.hidden_width, 1);
  layout.density_bias = take(1, 1);
  layout.color_weight = take(arch.hidden_width + arch.direction_encoding_size(), 3);
  layout.color_bias = take(1, 3);
  layout.total = off;
  return layout;
}

std::size_t FieldArch::parameter_count() const { return FieldLayout::of(*this).total; }

SceneField::SceneField(FieldArch arch, std::vector<float> params) : arch_(arch), params_(std::move(params)) {
  arch_.validate();
  if (params_.size() != arch_.parameter_count()) {
    throw ShapeMismatch("field expects " + std::to_string(arch_.parameter_count()) + " parameters, got " +
                        std::to_string(params_.size()));
  }
}

SceneField SceneField::initialize(const FieldArch& arch, std::uint64_t seed) {
  arch.validate();
  const FieldLayout layout = FieldLayout::of(arch);
  std::vector<float> params(layout.total, 0.0f);
  Rng rng(seed);
  auto fill = [&](const ParamBlock& b, double bound) {
    for (std::size_t i = 0; i < b.size(); ++i) params[b.offset + i] = static_cast<float>(rng.uniform(-bound, bound));
  };
  for (const auto& w : layout.hidden_weights) fill(w, std::sqrt(6.0 / w.rows));
  fill(layout.density_weight, 1.0 / std::sqrt(static_cast<double>(layout.density_weight.rows)));
  fill(layout.color_weight, 1.0 / std::sqrt(static_cast<double>(layout.color_weight.rows)));
  return SceneField(arch, std::move(params));
}

Eigen::VectorXd positional_encode(const Eigen::Vector3d& v, int levels) {
  Eigen::VectorXd out(3 + 6 * levels);
  out.head<3>() = v;
  for (int k = 0; k < levels; ++k) {
    const double freq = std::ldexp(std::numbers::pi, k);
    for (int i = 0; i < 3; ++i) {
      out[3 + 6 * k + i] = std::sin(freq * v[i]);
      out[3 + 6 * k + 3 + i] = std::cos(freq * v[i]);
    }
  }
  return out;
}

namespace detail {

template <typename S>
RowMatrix<S> encode_rows(const RowMatrix<S>& v, int levels) {
  RowMatrix<S> out(v.rows(), 3 + 6 * levels);
  out.leftCols(3) = v;
  for (int k = 0; k < levels; ++k) {
    const S freq = static_cast<S>(std::ldexp(std::numbers::pi, k));
    const RowMatrix<S> scaled = v * freq;
    out.middleCols(3 + 6 * k, 3) = scaled.array().sin().matrix();
    out.middleCols(3 + 6 * k + 3, 3) = scaled.array().cos().matrix();
  }
  return out;
}

template <typename S>
void mlp_forward(const FieldView<S>& field, const RowMatrix<S>& points, const RowMatrix<S>& dirs,
                 Eigen::Matrix<S, Eigen::Dynamic, 1>& sigma, RowMatrix<S>& color) {
  const FieldArch& arch = field.arch;
  const FieldLayout layout = FieldLayout::of(arch);
  if (field.params.size() != layout.total) throw ShapeMismatch("parameter vector does not match architecture");
  using ConstMap = Eigen::Map<const RowMatrix<S>>;
  auto block = [&](const ParamBlock& b) { return ConstMap(field.params.data() + b.offset, b.rows, b.cols); };

  RowMatrix<S> h = encode_rows<S>(points, arch.pe_levels_pos);
  for (int l = 0; l < arch.hidden_layers; ++l) {
    RowMatrix<S> z = h * block(layout.hidden_weights[l]);
    z.rowwise() += block(layout.hidden_biases[l]).row(0);
    if (arch.hidden_activation == Activation::kRelu) {
      h = z.cwiseMax(S(0));
    } else {
      h = z.unaryExpr([](S x) { return ad::detail::softplus_value(x); });
    }
  }
  RowMatrix<S> zs = h * block(layout.density_weight);
  zs.array() += block(layout.density_bias)(0, 0);
  sigma = zs.col(0).unaryExpr([](S x) { return ad::detail::softplus_value(x); });

  RowMatrix<S> hc(h.rows(), h.cols() + arch.direction_encoding_size());
  hc.leftCols(h.cols()) = h;
  hc.rightCols(arch.direction_encoding_size()) = encode_rows<S>(dirs, arch.pe_levels_dir);
  RowMatrix<S> zc = hc * block(layout.color_weight);
  zc.rowwise() += block(layout.color_bias).row(0);
  color = zc.unaryExpr([](S x) { return ad::detail::sigmoid_value(x); });
}

template RowMatrix<float> encode_rows(const RowMatrix<float>&, int);
template RowMatrix<double> encode_rows(const RowMatrix<double>&, int);
template void mlp_forward(const FieldView<float>&, const RowMatrix<float>&, const RowMatrix<float>&,
                          Eigen::Matrix<float, Eigen::Dynamic, 1>&, RowMatrix<float>&);
template void mlp_forward(const FieldView<double>&, const RowMatrix<double>&, const RowMatrix<double>&,
                          Eigen::Matrix<double, Eigen::Dynamic, 1>&, RowMatrix<double>&);

}  // namespace detail

template <typename S>
FieldSample field_eval(const FieldView<S>& field, const Eigen::Vector3d& x, const Eigen::Vector3d& d) {
  detail::RowMatrix<S> p = x.transpose().cast<S>();
  detail::RowMatrix<S> dir = d.transpose().cast<S>();
  Eigen::Matrix<S, Eigen::Dynamic, 1> sigma;
  detail::RowMatrix<S> color;
  detail::mlp_forward(field, p, dir, sigma, color);
  FieldSample out;
  out.sigma = static_cast<double>(sigma[0]);
  out.color = color.row(0).transpose().template cast<double>();
  return out;
}

template FieldSample field_eval(const FieldView<float>&, const Eigen::Vector3d&, const Eigen::Vector3d&);
template FieldSample field_eval(const FieldView<double>&, const Eigen::Vector3d&, const Eigen::Vector3d&);

}  // namespace evdeblur
