#include "evdeblur/optim.hpp"

namespace evdeblur {

AdamState AdamState::for_size(std::size_t n, double lr0, double decay_target_frac, std::int64_t total_steps) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr0 = lr0;
  s.decay_target_frac = decay_target_frac;
  s.total_steps = total_steps;
  return s;
}

double AdamState::learning_rate(std::int64_t at_step) const {
  if (total_steps <= 0) return lr0;
  return lr0 * std::pow(decay_target_frac, static_cast<double>(at_step) / static_cast<double>(total_steps));
}

namespace detail {

template <typename T>
void update_impl(std::span<T> params, std::span<const T> grads, AdamState& s) {
  if (params.size() != grads.size() || params.size() != s.m.size() || params.size() != s.v.size()) {
    throw ShapeMismatch("adam_step: params " + std::to_string(params.size()) + ", grads " +
                        std::to_string(grads.size()) + ", moments " + std::to_string(s.m.size()));
  }
  const double lr = s.learning_rate();
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] = static_cast<T>(params[i] - lr * m_hat / (std::sqrt(v_hat) + s.eps));
  }
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state) {
  update_impl(params, grads, state);
}

void adam_update(std::span<float> params, std::span<const float> grads, AdamState& state) {
  update_impl(params, grads, state);
}

}  // namespace detail

}  // namespace evdeblur
