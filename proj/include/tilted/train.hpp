#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilted/field.hpp"
#include "tilted/optim.hpp"

namespace tilted {

// Supervised samples: points (size * input_dim) and targets (size * output_dim).
struct SampleSet {
  int input_dim = 2;
  int output_dim = 1;
  std::vector<double> points;
  std::vector<double> targets;

  std::size_t size() const { return input_dim ? points.size() / input_dim : 0; }
  SampleSet subset(std::span<const std::size_t> indices) const;
};

struct TwoPhaseConfig {
  bool enabled = false;
  int bottleneck_channels = 8;
  std::int64_t bottleneck_steps = 0;
};

struct TrainConfig {
  std::int64_t steps = 1000;
  int batch_size = 1024;
  double lr_grid = 1e-2;
  double lr_decoder = 1e-2;
  double lr_transform = 1e-2;  // equal to lr_grid by default
  double lr_final_ratio = 0.1;  // exponential decay of every rate over the run
  double tv_weight = 1e-4;
  double l21_weight = 1e-5;
  // Low-pass ramp length as a fraction of `steps`; eta reaches J at the end
  // of the ramp. Negative disables the filter.
  double lowpass_fraction = 0.5;
  double lowpass_eta_start = 0.0;
  std::uint64_t seed = 0;
  TwoPhaseConfig two_phase;
  BatchReduction reduction = BatchReduction::Mean;
  AdamConfig adam;
  int threads = 1;
  double divergence_factor = 10.0;
  std::int64_t snapshot_interval = 50;
};

struct TrainReport {
  std::vector<double> loss_trace;  // total loss per step
  double final_train_psnr = 0.0;
  double holdout_psnr = 0.0;
  double wall_seconds = 0.0;        // informational; excluded from CSV output
  std::vector<double> final_angles; // radians; S^3 reports the rotation angle
  std::vector<std::string> events;

  // Deterministic text serializations.
  std::string trace_csv() const;    // step,loss
  std::string summary_csv() const;  // single header + row
};

// Jointly optimizes grids, decoder (Euclidean ADAM) and transforms
// (Riemannian ADAM). On a non-finite loss the field is restored to the last
// finite snapshot and NumericError is thrown.
TrainReport train_field(HybridField& field, const SampleSet& train, const TrainConfig& config,
                        const SampleSet* holdout = nullptr);

struct FieldFactory {
  // Channel-limited CP field used to recover transforms.
  std::function<HybridField(std::uint64_t seed)> bottleneck;
  // Final, more expressive field.
  std::function<HybridField(std::uint64_t seed)> full;
};

struct TwoPhaseResult {
  HybridField field;
  HybridField bottleneck;  // trained phase-1 field
  TrainReport bottleneck_report;
  TrainReport report;
  TransformSet bottleneck_transforms;  // phase-1 final transforms
  TransformSet initial_transforms;     // full field transforms as phase 2 began
  std::size_t discarded_parameters = 0;
};

TwoPhaseResult two_phase_train(const FieldFactory& factory, const SampleSet& train,
                               const TrainConfig& config, const SampleSet* holdout = nullptr);

// 10 log10(1 / MSE) for [0,1] signals; identical inputs give 99 dB.
double psnr(std::span<const double> a, std::span<const double> b);
double mse_to_psnr(double mse);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};
// |train| = ceil(n / 2); deterministic per seed.
HoldoutSplit holdout_split(std::size_t n, std::uint64_t seed);

// Field predictions for every sample in `set`.
std::vector<double> predict(const HybridField& field, const SampleSet& set, std::int64_t step,
                            int threads = 1);

}  // namespace tilted
