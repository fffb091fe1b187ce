#include "tilted/optim.hpp"

#include <algorithm>
#include <cmath>

#include "tilted/errors.hpp"

namespace tilted {

double LearningRateSchedule::at(std::int64_t step) const {
  if (decay_steps <= 0 || final_ratio == 1.0) return initial;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(decay_steps));
  return initial * std::pow(final_ratio, t);
}

void adam_direction(AdamState& state, std::span<const double> grads, std::span<double> out) {
  if (grads.size() != state.m.size() || out.size() != state.m.size()) {
    throw StructuralError("adam: gradient dimension does not match optimizer state");
  }
  const AdamConfig& c = state.config;
  const double alpha = state.lr.at(state.step);
  state.step += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = state.m[i] / bias1;
    const double vhat = state.v[i] / bias2;
    out[i] = -alpha * mhat / (std::sqrt(vhat) + c.eps);
  }
}

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grads) {
  if (params.size() != grads.size()) {
    throw StructuralError("adam: parameter and gradient sizes differ");
  }
  const AdamConfig& c = state.config;
  if (grads.size() != state.m.size()) {
    throw StructuralError("adam: gradient dimension does not match optimizer state");
  }
  const double alpha = state.lr.at(state.step);
  state.step += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = alpha / bias1;
  const double inv_sqrt_bias2 = 1.0 / std::sqrt(bias2);
  double* m = state.m.data();
  double* v = state.v.data();
  const std::size_t n = grads.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    params[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bias2 + c.eps);
  }
}

void riemannian_adam_step(std::span<UnitRotation2> params, RiemannianAdamState& state,
                          std::span<const double> tangent_grads) {
  if (state.tangent_dim != 1 || tangent_grads.size() != params.size() ||
      state.moments.m.size() != params.size()) {
    throw StructuralError("riemannian_adam_step: S^1 dimension mismatch");
  }
  std::vector<double> xi(params.size());
  adam_direction(state.moments, tangent_grads, xi);
  for (std::size_t t = 0; t < params.size(); ++t) params[t] = exp_map(params[t], xi[t]);
}

void riemannian_adam_step(std::span<UnitQuaternion> params, RiemannianAdamState& state,
                          std::span<const Vec3> tangent_grads) {
  if (state.tangent_dim != 3 || tangent_grads.size() != params.size() ||
      state.moments.m.size() != 3 * params.size()) {
    throw StructuralError("riemannian_adam_step: S^3 dimension mismatch");
  }
  std::vector<double> flat(3 * params.size());
  for (std::size_t t = 0; t < params.size(); ++t)
    for (int i = 0; i < 3; ++i) flat[3 * t + i] = tangent_grads[t][i];
  std::vector<double> xi(flat.size());
  adam_direction(state.moments, flat, xi);
  for (std::size_t t = 0; t < params.size(); ++t)
    params[t] = exp_map(params[t], Vec3{xi[3 * t], xi[3 * t + 1], xi[3 * t + 2]});
}

}  // namespace tilted
