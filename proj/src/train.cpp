#include "tilted/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tilted/errors.hpp"
#include "tilted/rng.hpp"

namespace tilted {

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out;
  out.input_dim = input_dim;
  out.output_dim = output_dim;
  out.points.reserve(indices.size() * input_dim);
  out.targets.reserve(indices.size() * output_dim);
  for (std::size_t i : indices) {
    out.points.insert(out.points.end(), points.begin() + i * input_dim, points.begin() + (i + 1) * input_dim);
    out.targets.insert(out.targets.end(), targets.begin() + i * output_dim,
                       targets.begin() + (i + 1) * output_dim);
  }
  return out;
}

double mse_to_psnr(double mse) {
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double psnr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw StructuralError("psnr: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return mse_to_psnr(sum / static_cast<double>(a.size()));
}

HoldoutSplit holdout_split(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw StructuralError("holdout_split: need at least two samples");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 0x686f6c64));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  const std::size_t n_train = (n + 1) / 2;
  HoldoutSplit split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.eval.assign(perm.begin() + n_train, perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.eval.begin(), split.eval.end());
  return split;
}

std::vector<double> predict(const HybridField& field, const SampleSet& set, std::int64_t step, int threads) {
  std::vector<double> out(set.size() * field.output_dim());
  constexpr std::size_t kChunk = 8192;
  const std::size_t dim = set.input_dim;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, set.size() - start);
    field_forward_batch(field, std::span<const double>(set.points).subspan(start * dim, n * dim), step,
                        std::span<double>(out).subspan(start * field.output_dim(), n * field.output_dim()),
                        threads);
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> transform_angles(const TransformSet& set) {
  std::vector<double> out;
  if (set.planar()) {
    for (const auto& r : set.planar_rotations()) out.push_back(r.angle());
  } else {
    for (const auto& q : set.spatial_rotations()) out.push_back(2.0 * std::acos(std::clamp(q.w, -1.0, 1.0)));
  }
  return out;
}

struct Snapshot {
  std::vector<double> grid;
  std::vector<double> decoder;
  TransformSet transforms;
};

Snapshot take_snapshot(const HybridField& f) {
  return {std::vector<double>(f.volume.parameters().begin(), f.volume.parameters().end()),
          std::vector<double>(f.decoder.parameters().begin(), f.decoder.parameters().end()),
          f.volume.transforms()};
}

void restore(HybridField& f, const Snapshot& s) {
  std::copy(s.grid.begin(), s.grid.end(), f.volume.parameters().begin());
  std::copy(s.decoder.begin(), s.decoder.end(), f.decoder.parameters().begin());
  f.volume.transforms() = s.transforms;
}

}  // namespace

std::string TrainReport::trace_csv() const {
  std::ostringstream out;
  out << "step,loss\n";
  for (std::size_t i = 0; i < loss_trace.size(); ++i) out << i << ',' << format_double(loss_trace[i]) << '\n';
  return out.str();
}

std::string TrainReport::summary_csv() const {
  std::ostringstream out;
  out << "steps,final_loss,train_psnr,holdout_psnr,angles\n";
  out << loss_trace.size() << ',' << (loss_trace.empty() ? std::string("nan") : format_double(loss_trace.back()))
      << ',' << format_double(final_train_psnr) << ',' << format_double(holdout_psnr) << ',';
  for (std::size_t i = 0; i < final_angles.size(); ++i) {
    if (i) out << ';';
    out << format_double(final_angles[i]);
  }
  out << '\n';
  return out.str();
}

TrainReport train_field(HybridField& field, const SampleSet& train, const TrainConfig& cfg,
                        const SampleSet* holdout) {
  if (cfg.lr_grid <= 0 || cfg.lr_decoder <= 0 || cfg.lr_transform <= 0) {
    throw UsageError("train: learning rates must be positive");
  }
  if (cfg.batch_size < 1) throw UsageError("train: batch size must be >= 1");
  if (train.input_dim != field.input_dim() || train.output_dim != field.output_dim()) {
    throw StructuralError("train: dataset dimensions do not match field");
  }
  if (cfg.steps > 0 && train.size() == 0) throw StructuralError("train: empty training set");
  const auto start = std::chrono::steady_clock::now();

  field.lowpass.frequencies = field.encoding.frequencies;
  field.lowpass.ramp_steps =
      cfg.lowpass_fraction < 0 ? 0 : std::max<std::int64_t>(1, std::llround(cfg.lowpass_fraction * cfg.steps));
  field.lowpass.eta_start = cfg.lowpass_eta_start;

  const auto schedule = [&](double lr) { return LearningRateSchedule{lr, cfg.lr_final_ratio, cfg.steps}; };
  AdamState grid_opt(field.volume.parameter_count(), cfg.adam, schedule(cfg.lr_grid));
  AdamState dec_opt(field.decoder.parameter_count(), cfg.adam, schedule(cfg.lr_decoder));
  const int T = field.volume.transforms().size();
  const int tdim = field.volume.transforms().tangent_dim();
  RiemannianAdamState rot_opt(T, tdim, cfg.adam, schedule(cfg.lr_transform));

  TrainReport report;
  report.loss_trace.reserve(cfg.steps);
  FieldWorkspace ws;
  FieldGradients grads;
  grads.resize_for(field);
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  const int in_dim = train.input_dim, out_dim = train.output_dim;
  std::vector<double> points(B * in_dim), targets(B * out_dim);
  Snapshot last_good = take_snapshot(field);
  double initial_loss = -1.0;
  bool lr_halved = false;

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = rng.below(train.size());
      std::copy_n(train.points.begin() + i * in_dim, in_dim, points.begin() + b * in_dim);
      std::copy_n(train.targets.begin() + i * out_dim, out_dim, targets.begin() + b * out_dim);
    }
    field_backward_into(field, points, targets, step, cfg.reduction, cfg.threads, ws, grads);
    double loss = grads.loss;
    if (cfg.tv_weight > 0) loss += cfg.tv_weight * tv_regularizer(field.volume, grads.grid, cfg.tv_weight);
    if (cfg.l21_weight > 0) loss += cfg.l21_weight * l21_regularizer(field.volume, grads.grid, cfg.l21_weight);

    if (!std::isfinite(loss)) {
      restore(field, last_good);
      throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                         "; field restored to last finite snapshot");
    }
    if (initial_loss < 0) initial_loss = loss;
    if (!lr_halved && loss > cfg.divergence_factor * initial_loss) {
      lr_halved = true;
      grid_opt.scale_learning_rate(0.5);
      dec_opt.scale_learning_rate(0.5);
      rot_opt.moments.scale_learning_rate(0.5);
      report.events.push_back("step " + std::to_string(step) + ": loss " + format_double(loss) +
                              " exceeded divergence threshold; learning rates halved");
    }
    report.loss_trace.push_back(loss);
    if (cfg.snapshot_interval > 0 && step % cfg.snapshot_interval == 0) last_good = take_snapshot(field);

    adam_step(field.volume.parameters(), grid_opt, grads.grid);
    adam_step(field.decoder.parameters(), dec_opt, grads.decoder);
    if (field.learn_transforms) {
      if (tdim == 1) {
        riemannian_adam_step(field.volume.transforms().planar_rotations(), rot_opt, grads.transform);
      } else {
        std::vector<Vec3> g(T);
        for (int t = 0; t < T; ++t) g[t] = {grads.transform[3 * t], grads.transform[3 * t + 1], grads.transform[3 * t + 2]};
        riemannian_adam_step(field.volume.transforms().spatial_rotations(), rot_opt, g);
      }
    }
  }

  const std::int64_t final_step = cfg.steps;
  if (train.size() > 0) {
    report.final_train_psnr = psnr(predict(field, train, final_step, cfg.threads), train.targets);
  }
  if (holdout && holdout->size() > 0) {
    report.holdout_psnr = psnr(predict(field, *holdout, final_step, cfg.threads), holdout->targets);
  }
  report.final_angles = transform_angles(field.volume.transforms());
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TwoPhaseResult two_phase_train(const FieldFactory& factory, const SampleSet& train, const TrainConfig& cfg,
                               const SampleSet* holdout) {
  if (!cfg.two_phase.enabled) throw UsageError("two_phase_train: two_phase.enabled is false");
  HybridField bottleneck = factory.bottleneck(cfg.seed);
  HybridField full = factory.full(cfg.seed);
  if (bottleneck.volume.transforms().size() != full.volume.transforms().size() ||
      bottleneck.volume.transforms().dim() != full.volume.transforms().dim()) {
    throw StructuralError("two_phase_train: bottleneck and full fields need matching transform sets");
  }
  if (bottleneck.volume.spec().channels >= full.volume.spec().channels) {
    throw UsageError("two_phase_train: bottleneck channels must be below the full channel count");
  }
  TrainConfig phase1 = cfg;
  phase1.steps = cfg.two_phase.bottleneck_steps;
  TwoPhaseResult result;
  result.bottleneck_report = train_field(bottleneck, train, phase1, holdout);
  result.bottleneck_transforms = bottleneck.volume.transforms();
  result.discarded_parameters = bottleneck.parameter_count();

  full.volume.transforms() = result.bottleneck_transforms;
  result.initial_transforms = full.volume.transforms();
  TrainConfig phase2 = cfg;
  phase2.seed = derive_seed(cfg.seed, 2);
  result.report = train_field(full, train, phase2, holdout);
  result.field = std::move(full);
  result.bottleneck = std::move(bottleneck);
  return result;
}

}  // namespace tilted
