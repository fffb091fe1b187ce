#include "tilted/bench.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tilted/errors.hpp"

namespace tilted {

std::string to_string(Variant v) { return v == Variant::AxisAligned ? "axis-aligned" : "tilted"; }

Variant parse_variant(const std::string& name) {
  if (name == "axis-aligned" || name == "axis") return Variant::AxisAligned;
  if (name == "tilted") return Variant::Tilted;
  throw UsageError("unknown variant '" + name + "' (expected axis-aligned or tilted)");
}

std::vector<Variant> parse_variants(const std::string& list) {
  std::vector<Variant> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
    if (!item.empty()) out.push_back(parse_variant(item));
  }
  if (out.empty()) throw UsageError("variant list is empty");
  return out;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TrainConfig ImageModelConfig::default_train() {
  TrainConfig t;
  t.steps = 250;
  t.batch_size = 1024;
  t.lr_transform = 0.1;
  t.two_phase.bottleneck_steps = 200;
  return t;
}

void ImageModelConfig::validate() const {
  if (channels < 1 || resolution < 2 || transforms < 1) throw UsageError("model: channels, resolution, transforms out of range");
  if (channels % transforms) throw UsageError("model: transforms must divide channels");
  if (two_phase && (bottleneck_channels < transforms || bottleneck_channels % transforms)) {
    throw UsageError("model: bottleneck channels must be a positive multiple of transforms");
  }
  if (two_phase && bottleneck_channels >= channels) throw UsageError("model: bottleneck channels must be below channels");
  if (!(extent > 0)) throw UsageError("model: extent must be positive");
  if (train.steps < 0) throw UsageError("model: steps must be >= 0");
}

double fold_degrees(double deg, double period) {
  double r = std::fmod(deg, period);
  if (r < 0) r += period;
  return r >= period ? 0.0 : r;
}

double dominant_content_angle(const HybridField& field) {
  const auto& set = field.volume.transforms();
  if (!set.planar()) throw StructuralError("dominant_content_angle: planar transforms required");
  std::vector<double> energy(set.size(), 0.0);
  const auto params = field.volume.parameters();
  for (const auto& s : field.volume.slots())
    for (std::size_t i = 0; i < s.size; ++i) energy[s.transform] += params[s.offset + i] * params[s.offset + i];
  const int best = static_cast<int>(std::max_element(energy.begin(), energy.end()) - energy.begin());
  return fold_degrees(-set.planar_rotations()[best].angle() * 180.0 / std::numbers::pi);
}

namespace {

FieldConfig image_field_config(const ImageModelConfig& m, bool learn, int output_dim) {
  FieldConfig fc;
  fc.hidden = m.hidden;
  fc.encoding.frequencies = m.frequencies;
  fc.learn_transforms = learn;
  fc.output_dim = output_dim;
  return fc;
}

}  // namespace

ImageFitResult fit_image(const Image& image, Variant variant, const ImageModelConfig& model, std::uint64_t seed,
                         int threads) {
  model.validate();
  const SampleSet all = image_samples(image, model.extent);
  const HoldoutSplit split = holdout_split(all.size(), seed);
  const SampleSet train = all.subset(split.train), eval = all.subset(split.eval);
  TrainConfig tc = model.train;
  tc.seed = seed;
  tc.threads = threads;
  ImageFitResult out;
  if (variant == Variant::AxisAligned) {
    const auto spec = DecompositionSpec::make(DecompositionKind::CP2D, model.channels, model.resolution, {1.0}, 1);
    out.field = HybridField::create(spec, image_field_config(model, false, image.channels), seed);
    out.initial_transforms = out.field.volume.transforms();
    out.report = train_field(out.field, train, tc, &eval);
  } else if (model.two_phase) {
    FieldFactory factory;
    const FieldConfig fc = image_field_config(model, true, image.channels);
    factory.bottleneck = [&](std::uint64_t s) {
      return HybridField::create(DecompositionSpec::make(DecompositionKind::CP2D, model.bottleneck_channels,
                                                         model.resolution, {1.0}, model.transforms),
                                 fc, s);
    };
    factory.full = [&](std::uint64_t s) {
      return HybridField::create(
          DecompositionSpec::make(DecompositionKind::CP2D, model.channels, model.resolution, {1.0}, model.transforms),
          fc, s);
    };
    tc.two_phase.enabled = true;
    TwoPhaseResult r = two_phase_train(factory, train, tc, &eval);
    out.bottleneck_transforms = r.bottleneck_transforms;
    out.initial_transforms = r.initial_transforms;
    out.phase1_angle_deg = dominant_content_angle(r.bottleneck);
    out.field = std::move(r.field);
    out.report = std::move(r.report);
  } else {
    const auto spec =
        DecompositionSpec::make(DecompositionKind::CP2D, model.channels, model.resolution, {1.0}, model.transforms);
    out.field = HybridField::create(spec, image_field_config(model, true, image.channels), seed);
    out.initial_transforms = out.field.volume.transforms();
    out.report = train_field(out.field, train, tc, &eval);
    out.phase1_angle_deg = dominant_content_angle(out.field);
  }
  out.train_psnr = out.report.final_train_psnr;
  out.holdout_psnr = out.report.holdout_psnr;
  out.angles = out.report.final_angles;
  return out;
}

std::vector<double> RotationSweepConfig::default_angles() {
  std::vector<double> a;
  for (int d = 0; d <= 180; d += 10) a.push_back(d);
  return a;
}

void RotationSweepConfig::validate() const {
  if (angles.empty()) throw UsageError("rotation sweep: no angles");
  for (double a : angles)
    if (!(a >= 0.0 && a <= 180.0)) throw UsageError("rotation sweep: angles must lie in [0, 180]");
  if (seeds.empty()) throw UsageError("rotation sweep: seeds must be non-empty");
  if (variants.empty()) throw UsageError("rotation sweep: no variants");
  if (image_size < 2) throw UsageError("rotation sweep: image size must be >= 2");
  if (threads < 1) throw UsageError("rotation sweep: threads must be >= 1");
  model.validate();
}

namespace {

// Runs fn(i) for i < count on up to `threads` workers; the first exception
// in index order is rethrown.
template <class Fn>
void run_cells(std::size_t count, int threads, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (std::size_t i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string angle_label(double a) {
  std::string s = format_number(a);
  return s;
}

}  // namespace

ExperimentReport rotation_sweep(const RotationSweepConfig& cfg) {
  cfg.validate();
  std::vector<Image> images;
  for (double a : cfg.angles) images.push_back(load_rotated(cfg.image, a, cfg.image_size));
  struct Cell {
    std::size_t angle;
    std::uint64_t seed;
    Variant variant;
    double holdout = 0, train = 0, phase1 = 0;
  };
  std::vector<Cell> cells;
  for (std::size_t a = 0; a < cfg.angles.size(); ++a)
    for (std::uint64_t s : cfg.seeds)
      for (Variant v : cfg.variants) cells.push_back({a, s, v});
  run_cells(cells.size(), cfg.threads, [&](std::size_t i) {
    Cell& c = cells[i];
    const ImageFitResult r = fit_image(images[c.angle], c.variant, cfg.model, c.seed, 1);
    c.holdout = r.holdout_psnr;
    c.train = r.train_psnr;
    c.phase1 = r.phase1_angle_deg;
  });
  ExperimentReport rep;
  for (const auto& c : cells) {
    const std::string v = to_string(c.variant), cell = angle_label(cfg.angles[c.angle]);
    rep.add("rotation_sweep", v, cell, c.seed, "holdout_psnr", c.holdout);
    rep.add("rotation_sweep", v, cell, c.seed, "train_psnr", c.train);
    if (c.variant == Variant::Tilted) rep.add("rotation_sweep", v, cell, c.seed, "phase1_angle_deg", c.phase1);
  }
  for (Variant v : cfg.variants)
    for (std::uint64_t s : cfg.seeds) {
      std::vector<double> p;
      for (const auto& c : cells)
        if (c.variant == v && c.seed == s) p.push_back(c.holdout);
      const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
      rep.add("rotation_sweep", to_string(v), "all", s, "psnr_mean", mean(p));
      rep.add("rotation_sweep", to_string(v), "all", s, "psnr_std", sample_std(p));
      rep.add("rotation_sweep", to_string(v), "all", s, "psnr_range", *hi - *lo);
    }
  return rep;
}

void ResolutionSweepConfig::validate() const {
  if (resolutions.empty()) throw UsageError("resolution sweep: no resolutions");
  for (int r : resolutions)
    if (r < 2) throw UsageError("resolution sweep: resolutions must be >= 2");
  if (seeds.empty()) throw UsageError("resolution sweep: seeds must be non-empty");
  if (variants.empty()) throw UsageError("resolution sweep: no variants");
  if (!(angle >= 0.0 && angle <= 180.0)) throw UsageError("resolution sweep: angle must lie in [0, 180]");
  if (threads < 1) throw UsageError("resolution sweep: threads must be >= 1");
  model.validate();
}

ExperimentReport resolution_sweep(const ResolutionSweepConfig& cfg) {
  cfg.validate();
  const Image image = load_rotated(cfg.image, cfg.angle, cfg.image_size);
  struct Cell {
    int resolution;
    std::uint64_t seed;
    Variant variant;
    double holdout = 0, train = 0;
    std::size_t params = 0;
  };
  std::vector<Cell> cells;
  for (int r : cfg.resolutions)
    for (std::uint64_t s : cfg.seeds)
      for (Variant v : cfg.variants) cells.push_back({r, s, v});
  run_cells(cells.size(), cfg.threads, [&](std::size_t i) {
    Cell& c = cells[i];
    ImageModelConfig m = cfg.model;
    m.resolution = c.resolution;
    const ImageFitResult r = fit_image(image, c.variant, m, c.seed, 1);
    c.holdout = r.holdout_psnr;
    c.train = r.train_psnr;
    c.params = r.field.volume.parameter_count();
  });
  ExperimentReport rep;
  for (const auto& c : cells) {
    const std::string v = to_string(c.variant), cell = std::to_string(c.resolution);
    rep.add("resolution_sweep", v, cell, c.seed, "holdout_psnr", c.holdout);
    rep.add("resolution_sweep", v, cell, c.seed, "train_psnr", c.train);
    rep.add("resolution_sweep", v, cell, c.seed, "grid_parameters", static_cast<double>(c.params));
  }
  return rep;
}

double iou(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw StructuralError("iou: sample lists differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] <= 0.0, b = gt[i] <= 0.0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

AnalyticSdf make_shape(const ShapeSpec& spec, std::uint64_t seed) {
  if (spec.kind == "sphere") return AnalyticSdf::sphere(spec.radius);
  if (spec.kind == "box") return AnalyticSdf::box(spec.half_extents);
  if (spec.kind == "rotated_box") return AnalyticSdf::rotated_box(spec.half_extents, random_rotation(seed));
  if (spec.kind == "union") {
    return AnalyticSdf::union_of({AnalyticSdf::rotated_box(spec.half_extents, random_rotation(seed), {-0.2, 0, 0}),
                                  AnalyticSdf::sphere(0.5 * spec.radius, {0.45, 0.2, 0.1})});
  }
  throw UsageError("unknown shape '" + spec.kind + "' (expected sphere, box, rotated_box or union)");
}

TrainConfig SdfFitConfig::default_train() {
  TrainConfig t;
  t.steps = 500;
  t.batch_size = 1024;
  t.lr_transform = 0.1;
  return t;
}

void SdfFitConfig::validate() const {
  if (channels < 1 || resolution < 2 || transforms < 1) throw UsageError("sdf: channels, resolution, transforms out of range");
  if (channels % transforms) throw UsageError("sdf: transforms must divide channels");
  if (train_points < 2) throw UsageError("sdf: need at least two training points");
  if (eval_resolution < 2) throw UsageError("sdf: evaluation resolution must be >= 2");
  if (uniform_fraction < 0 || uniform_fraction > 1) throw UsageError("sdf: uniform fraction must be in [0,1]");
}

SdfFitResult fit_sdf(const AnalyticSdf& shape, DecompositionKind kind, bool tilted, const SdfFitConfig& cfg,
                     std::uint64_t seed, int threads) {
  cfg.validate();
  if (kind != DecompositionKind::KPlanes && kind != DecompositionKind::VectorMatrix && kind != DecompositionKind::CP3D) {
    throw UsageError("sdf: decomposition must be 3D (kplanes, vm or cp3d)");
  }
  const SampleSet train = sample_sdf(shape, cfg.train_points, cfg.uniform_fraction, cfg.near_surface_sigma, seed);
  const SampleSet eval = sdf_lattice(shape, cfg.eval_resolution);
  FieldConfig fc;
  fc.hidden = cfg.hidden;
  fc.encoding.frequencies = cfg.frequencies;
  fc.learn_transforms = tilted;
  fc.grid_init_mean = cfg.grid_init_mean;
  fc.grid_init_scale = cfg.grid_init_scale;
  const auto spec = DecompositionSpec::make(kind, cfg.channels, cfg.resolution, {1.0}, tilted ? cfg.transforms : 1);
  SdfFitResult out;
  out.field = HybridField::create(spec, fc, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.threads = threads;
  out.report = train_field(out.field, train, tc);
  const std::vector<double> pred = predict(out.field, eval, tc.steps, threads);
  out.iou = iou(pred, eval.targets);
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) mse += (pred[i] - eval.targets[i]) * (pred[i] - eval.targets[i]);
  out.eval_mse = mse / static_cast<double>(pred.size());
  out.train_psnr = out.report.final_train_psnr;
  out.parameters = out.field.parameter_count();
  if (!std::isfinite(out.iou) || !std::isfinite(out.eval_mse)) throw NumericError("sdf: non-finite metric");
  return out;
}

ExperimentReport sdf_fit(const ShapeSpec& shape, DecompositionKind kind, bool tilted, const SdfFitConfig& cfg,
                         const std::vector<std::uint64_t>& seeds, int threads) {
  if (seeds.empty()) throw UsageError("sdf: seeds must be non-empty");
  std::vector<SdfFitResult> results(seeds.size());
  std::vector<std::string> labels(seeds.size());
  run_cells(seeds.size(), threads, [&](std::size_t i) {
    const AnalyticSdf s = make_shape(shape, seeds[i]);
    labels[i] = s.describe();
    results[i] = fit_sdf(s, kind, tilted, cfg, seeds[i], 1);
  });
  ExperimentReport rep;
  const std::string id = "sdf_fit/" + to_string(kind);
  const std::string v = tilted ? "tilted" : "axis-aligned";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    rep.add(id, v, labels[i], seeds[i], "iou", results[i].iou);
    rep.add(id, v, labels[i], seeds[i], "train_psnr", results[i].train_psnr);
    rep.add(id, v, labels[i], seeds[i], "eval_mse", results[i].eval_mse);
  }
  return rep;
}

Image feature_norm_image(const HybridField& field, int width, int height, double extent) {
  if (field.input_dim() != 2) throw StructuralError("feature_norm_image: 2D field required");
  Image out(width, height, 1);
  double hi = 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double p[2] = {extent * (-1.0 + 2.0 * x / std::max(1, width - 1)),
                           extent * (-1.0 + 2.0 * y / std::max(1, height - 1))};
      const std::vector<double> z = query(field.volume, p);
      double n = 0.0;
      for (double v : z) n += v * v;
      out.at(x, y) = std::sqrt(n);
      hi = std::max(hi, out.at(x, y));
    }
  if (hi > 0)
    for (double& v : out.data) v /= hi;
  return out;
}

}  // namespace tilted
