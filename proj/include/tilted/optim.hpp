#pragma once

// ADAM in flat Euclidean parameter space and its Riemannian counterpart on
// S^1 / S^3, where moments live in the (right-trivialized) Lie algebra and
// updates are applied with the exponential map.

#include <cstdint>
#include <span>
#include <vector>

#include "tilted/geometry.hpp"

namespace tilted {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-step learning rate alpha_k: exponential interpolation from `initial`
// to `initial * final_ratio` over `decay_steps` steps, constant afterwards.
struct LearningRateSchedule {
  double initial = 1e-2;
  double final_ratio = 1.0;
  std::int64_t decay_steps = 0;

  double at(std::int64_t step) const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  AdamConfig config;
  LearningRateSchedule lr;

  AdamState() = default;
  AdamState(std::size_t dim, AdamConfig cfg, LearningRateSchedule schedule)
      : m(dim, 0.0), v(dim, 0.0), config(cfg), lr(schedule) {}

  // Multiplies the schedule by `factor` (divergence guard).
  void scale_learning_rate(double factor) { lr.initial *= factor; }
};

// One ADAM step: params -= alpha_k * mhat / (sqrt(vhat) + eps).
void adam_step(std::span<double> params, AdamState& state, std::span<const double> grads);

// The ADAM-scaled descent direction for one step, without applying it. Used
// both by the Riemannian update and by tests comparing against a scalar
// reference.
void adam_direction(AdamState& state, std::span<const double> grads, std::span<double> out);

struct RiemannianAdamState {
  AdamState moments;  // dimension = tangent_dim * parameter count
  int tangent_dim = 1;

  RiemannianAdamState() = default;
  RiemannianAdamState(std::size_t count, int tangent_dimension, AdamConfig cfg,
                      LearningRateSchedule schedule)
      : moments(count * tangent_dimension, cfg, schedule), tangent_dim(tangent_dimension) {}
};

// tau_t <- tau_t * Exp(-alpha_k * mhat_t / (sqrt(vhat_t) + eps)).
// Throws StructuralError when the gradient or state dimensions disagree.
void riemannian_adam_step(std::span<UnitRotation2> params, RiemannianAdamState& state,
                          std::span<const double> tangent_grads);
void riemannian_adam_step(std::span<UnitQuaternion> params, RiemannianAdamState& state,
                          std::span<const Vec3> tangent_grads);

}  // namespace tilted
