#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evdeblur/errors.hpp"

namespace evdeblur {

/// Adam moments plus an exponential learning-rate schedule
/// lr(step) = lr0 · decay_target_frac^(step / total_steps).
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr0 = 5e-4;
  double decay_target_frac = 0.1;
  std::int64_t total_steps = 5000;

  static AdamState for_size(std::size_t n, double lr0, double decay_target_frac, std::int64_t total_steps);

  double learning_rate(std::int64_t at_step) const;
  double learning_rate() const { return learning_rate(step); }
};

namespace detail {
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state);
void adam_update(std::span<float> params, std::span<const float> grads, AdamState& state);
}  // namespace detail

/// One bias-corrected Adam step. Throws ShapeMismatch if params, grads and
/// the moment vectors disagree in length.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state) {
  detail::adam_update(params, grads, state);
}

}  // namespace evdeblur
