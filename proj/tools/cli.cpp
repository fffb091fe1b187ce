// tilted: command-line front end.
//
//   tilted <subcommand> [--config FILE] [--out DIR] [--seed N] [--threads N]
//                       [--print-config] [subcommand flags]
//
// Settings are resolved as schema defaults < config file < flags.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tilted/bench.hpp"
#include "tilted/checkpoint.hpp"
#include "tilted/config.hpp"
#include "tilted/csv.hpp"
#include "tilted/errors.hpp"
#include "tilted/plot.hpp"
#include "tilted/rng.hpp"
#include "tilted/theory.hpp"

namespace fs = std::filesystem;
using namespace tilted;

namespace {

constexpr const char* kOutEnv = "TILTED_OUT_DIR";

struct Context {
  Settings settings;
  fs::path out;
  std::optional<std::uint64_t> seed;
  int threads = 1;

  std::string path(const std::string& name) const { return (out / name).string(); }
};

struct Command {
  std::string name;
  std::string help;
  ConfigSchema schema;
  std::function<void(Context&)> run;
};

// ---------------------------------------------------------------------------
// shared schema pieces

void add_train_schema(ConfigSchema& s, const TrainConfig& d, bool with_bottleneck) {
  s.push_back({"train.steps", std::to_string(d.steps), "optimization steps", "steps"});
  if (with_bottleneck) {
    s.push_back({"train.bottleneck_steps", std::to_string(d.two_phase.bottleneck_steps),
                 "phase-1 steps of the two-phase schedule", "bottleneck-steps"});
  }
  s.push_back({"train.batch_size", std::to_string(d.batch_size), "samples per step", ""});
  s.push_back({"train.lr_grid", format_number(d.lr_grid), "grid learning rate", ""});
  s.push_back({"train.lr_decoder", format_number(d.lr_decoder), "decoder learning rate", ""});
  s.push_back({"train.lr_transform", format_number(d.lr_transform), "transform learning rate", ""});
  s.push_back({"train.lr_final_ratio", format_number(d.lr_final_ratio), "final/initial learning rate", ""});
  s.push_back({"train.tv_weight", format_number(d.tv_weight), "total variation weight", ""});
  s.push_back({"train.l21_weight", format_number(d.l21_weight), "l2,1 weight", ""});
  s.push_back({"train.lowpass_fraction", format_number(d.lowpass_fraction),
               "low-pass ramp length as a fraction of steps (negative disables)", ""});
}

TrainConfig read_train(const Settings& s, TrainConfig t, bool with_bottleneck) {
  t.steps = s.get_int("train.steps");
  if (with_bottleneck) t.two_phase.bottleneck_steps = s.get_int("train.bottleneck_steps");
  t.batch_size = static_cast<int>(s.get_int("train.batch_size"));
  t.lr_grid = s.get_double("train.lr_grid");
  t.lr_decoder = s.get_double("train.lr_decoder");
  t.lr_transform = s.get_double("train.lr_transform");
  t.lr_final_ratio = s.get_double("train.lr_final_ratio");
  t.tv_weight = s.get_double("train.tv_weight");
  t.l21_weight = s.get_double("train.l21_weight");
  t.lowpass_fraction = s.get_double("train.lowpass_fraction");
  if (t.steps < 0 || t.two_phase.bottleneck_steps < 0) throw UsageError("train: steps must be >= 0");
  return t;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> to_ints(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

std::vector<std::uint64_t> to_seeds(const std::vector<std::int64_t>& v) {
  std::vector<std::uint64_t> out;
  for (auto x : v) {
    if (x < 0) throw UsageError("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(x));
  }
  return out;
}

void add_model_schema(ConfigSchema& s) {
  const ImageModelConfig d;
  s.push_back({"model.channels", std::to_string(d.channels), "latent channels (d)", "channels"});
  s.push_back({"model.resolution", std::to_string(d.resolution), "grid nodes per axis", "resolution"});
  s.push_back({"model.transforms", std::to_string(d.transforms), "learned transforms (T)", "transforms"});
  s.push_back({"model.hidden", join_ints(d.hidden), "decoder hidden widths", ""});
  s.push_back({"model.frequencies", std::to_string(d.frequencies), "Fourier bands per channel", ""});
  s.push_back({"model.extent", format_number(d.extent), "pixel coordinates span [-extent, extent]", ""});
  s.push_back({"model.two_phase", d.two_phase ? "true" : "false", "recover transforms with a bottleneck phase", ""});
  s.push_back({"model.bottleneck_channels", std::to_string(d.bottleneck_channels), "phase-1 channels", ""});
  add_train_schema(s, d.train, true);
}

ImageModelConfig read_model(const Settings& s) {
  ImageModelConfig m;
  m.channels = static_cast<int>(s.get_int("model.channels"));
  m.resolution = static_cast<int>(s.get_int("model.resolution"));
  m.transforms = static_cast<int>(s.get_int("model.transforms"));
  m.hidden = to_ints(s.get_ints("model.hidden"));
  m.frequencies = static_cast<int>(s.get_int("model.frequencies"));
  m.extent = s.get_double("model.extent");
  m.two_phase = s.get_bool("model.two_phase");
  m.bottleneck_channels = static_cast<int>(s.get_int("model.bottleneck_channels"));
  m.train = read_train(s, m.train, true);
  m.validate();
  return m;
}

std::vector<std::uint64_t> resolve_seeds(const Context& ctx, const std::string& key) {
  if (ctx.seed) return {*ctx.seed};
  const auto seeds = to_seeds(ctx.settings.get_ints(key));
  if (seeds.empty()) throw UsageError(key + " must not be empty");
  return seeds;
}

void note(const std::string& msg) { std::cerr << msg << '\n'; }

// ---------------------------------------------------------------------------
// theory

Command theory_spectrum() {
  Command c{"theory-spectrum", "top-k singular values of the sampled diamond vs the analytic spectrum", {}, {}};
  c.schema = {{"spectrum.n", "1024", "grid size", "n"},
              {"spectrum.k", "8", "number of singular values", "k"},
              {"spectrum.alpha", "0.70710678118654752", "square half-width", "alpha"}};
  c.run = [](Context& ctx) {
    const int n = static_cast<int>(ctx.settings.get_int("spectrum.n"));
    const int k = static_cast<int>(ctx.settings.get_int("spectrum.k"));
    const double alpha = ctx.settings.get_double("spectrum.alpha");
    if (k < 1 || k > n) throw UsageError("spectrum.k must be in [1, n]");
    const Eigen::VectorXd s = theory::singular_values(theory::rotated_square(n, alpha, std::numbers::pi / 4));
    CsvTable t({"k", "lambda", "measured", "relative_error"});
    for (int i = 1; i <= k; ++i) {
      const double lam = std::abs(theory::diamond_eigenvalue(alpha, i));
      const double m = s(i - 1) * 2.0 / n;
      t.add_row({std::to_string(i), format_number(lam), format_number(m), format_number(std::abs(m - lam) / lam)});
    }
    t.write(ctx.path("spectrum.csv"));
  };
  return c;
}

Command theory_lowrank() {
  Command c{"theory-lowrank", "rank-F error floor of the sampled diamond across grid sizes", {}, {}};
  c.schema = {{"lowrank.sizes", "128,256,512", "grid sizes", "sizes"},
              {"lowrank.max_rank", "32", "largest F", "max-rank"},
              {"lowrank.psnr_targets", "30,40,50", "PSNR targets (dB) for the minimal rank table", ""},
              {"lowrank.alpha", "0.70710678118654752", "square half-width", "alpha"}};
  c.run = [](Context& ctx) {
    const auto sizes = to_ints(ctx.settings.get_ints("lowrank.sizes"));
    const int max_rank = static_cast<int>(ctx.settings.get_int("lowrank.max_rank"));
    const auto targets = ctx.settings.get_doubles("lowrank.psnr_targets");
    const double alpha = ctx.settings.get_double("lowrank.alpha");
    if (sizes.empty() || max_rank < 1) throw UsageError("lowrank: sizes and max_rank required");
    CsvTable errors({"n", "F", "mse", "mse_times_1pF"});
    CsvTable ranks({"n", "psnr_db", "min_rank"});
    std::vector<Series> series;
    for (int n : sizes) {
      const Eigen::VectorXd s = theory::singular_values(theory::rotated_square(n, alpha, std::numbers::pi / 4));
      Series ser{"n=" + std::to_string(n), {}, {}};
      for (int F = 1; F <= max_rank; ++F) {
        const double mse = theory::rank_error_from_spectrum(s, n, F);
        errors.add_row({std::to_string(n), std::to_string(F), format_number(mse), format_number(mse * (1 + F))});
        ser.x.push_back(F);
        ser.y.push_back(mse * (1 + F));
      }
      series.push_back(ser);
      for (double db : targets) {
        ranks.add_row({std::to_string(n), format_number(db),
                       std::to_string(theory::minimal_rank_for_psnr(s, n, db))});
      }
    }
    errors.write(ctx.path("lowrank.csv"));
    ranks.write(ctx.path("lowrank_ranks.csv"));
    save_line_chart(ctx.path("lowrank.png"), series);
  };
  return c;
}

Command theory_align() {
  Command c{"theory-align", "three-stage alternating alignment/factorization from random starts", {}, {}};
  const theory::AlternatingConfig d;
  c.schema = {{"align.n", std::to_string(d.n), "grid size", "n"},
              {"align.alpha", "0.70710678118654752", "square half-width", ""},
              {"align.nu_true", format_number(d.nu_true), "true rotation (radians)", ""},
              {"align.sigma2", format_number(d.sigma2), "smoothing variance", ""},
              {"align.beta", format_number(d.beta), "alignment step size", ""},
              {"align.t_rough", std::to_string(d.t_rough), "rough power iterations", ""},
              {"align.t_nu", std::to_string(d.t_nu), "alignment descent steps", ""},
              {"align.t_u", std::to_string(d.t_u), "refinement power iterations", ""},
              {"align.epsilon", format_number(d.epsilon), "non-escape radius is 3 epsilon", ""},
              {"align.observation", "direct", "direct or bilinear sampling of the rotated square", ""},
              {"align.runs", "200", "random starts", "runs"},
              {"align.seed", "0", "base seed (per-run seeds are derived)", ""},
              {"align.angle_tolerance", "0.01", "success: folded angle error bound (radians)", ""},
              {"align.factor_tolerance", "0.2", "success: factor error bound", ""},
              {"align.rate_steps", "10", "power steps for the rough-stage rate", ""}};
  c.run = [](Context& ctx) {
    const Settings& s = ctx.settings;
    theory::AlternatingConfig cfg;
    cfg.n = static_cast<int>(s.get_int("align.n"));
    cfg.alpha = s.get_double("align.alpha");
    cfg.nu_true = s.get_double("align.nu_true");
    cfg.sigma2 = s.get_double("align.sigma2");
    cfg.beta = s.get_double("align.beta");
    cfg.t_rough = static_cast<int>(s.get_int("align.t_rough"));
    cfg.t_nu = static_cast<int>(s.get_int("align.t_nu"));
    cfg.t_u = static_cast<int>(s.get_int("align.t_u"));
    cfg.epsilon = s.get_double("align.epsilon");
    const std::string obs = s.get_string("align.observation");
    if (obs == "direct") {
      cfg.observation = theory::Observation::Direct;
    } else if (obs == "bilinear") {
      cfg.observation = theory::Observation::Bilinear;
    } else {
      throw UsageError("align.observation must be direct or bilinear");
    }
    const std::int64_t runs = s.get_int("align.runs");
    if (runs < 1) throw UsageError("align.runs must be >= 1");
    const std::uint64_t base = ctx.seed ? *ctx.seed : s.get_uint("align.seed");
    const double tol_angle = s.get_double("align.angle_tolerance"), tol_factor = s.get_double("align.factor_tolerance");

    const theory::AlternatingSolver solver(cfg);
    CsvTable table({"run", "seed", "nu0", "nu_hat", "angle_error", "factor_error", "success", "non_escape"});
    int ok = 0, kept = 0;
    for (std::int64_t r = 0; r < runs; ++r) {
      const std::uint64_t seed = derive_seed(base, static_cast<std::uint64_t>(r));
      const theory::AlternatingResult res = solver.run(seed);
      const bool success = res.angle_error <= tol_angle && res.factor_error <= tol_factor;
      const bool stays = theory::non_escape(res.nu_trace, cfg.nu_true, 3.0 * cfg.epsilon);
      ok += success;
      kept += stays;
      table.add_row({std::to_string(r), std::to_string(seed), format_number(res.nu0), format_number(res.nu_hat),
                     format_number(res.angle_error), format_number(res.factor_error), success ? "1" : "0",
                     stays ? "1" : "0"});
    }
    table.write(ctx.path("align_runs.csv"));

    const int rate_steps = static_cast<int>(s.get_int("align.rate_steps"));
    const theory::RateMeasurement rate = theory::rough_stage_rate(cfg.n, cfg.alpha, rate_steps);
    CsvTable rt({"step", "error", "ratio"});
    for (int k = 0; k <= rate_steps; ++k) {
      rt.add_row({std::to_string(k), format_number(rate.errors[k]), k ? format_number(rate.ratios[k - 1]) : ""});
    }
    rt.write(ctx.path("rough_rate.csv"));

    CsvTable sum({"metric", "value"});
    sum.add_row({"runs", std::to_string(runs)});
    sum.add_row({"success_fraction", format_number(static_cast<double>(ok) / runs)});
    sum.add_row({"non_escape_fraction", format_number(static_cast<double>(kept) / runs)});
    sum.add_row({"rough_mean_rate", format_number(rate.mean_rate)});
    sum.add_row({"rough_max_ratio", format_number(rate.max_ratio)});
    sum.add_row({"rough_gap_ratio", format_number(rate.gap_ratio)});
    sum.write(ctx.path("align_summary.csv"));
  };
  return c;
}

// ---------------------------------------------------------------------------
// fitting

Command fit_image2d() {
  Command c{"fit-image2d", "fit one rotated image with the axis-aligned or TILTED 2D model", {}, {}};
  c.schema = {{"image.source", "brick", "brick, stripe, checker or a PNG path", "image"},
              {"image.size", "128", "pixels per side", "size"},
              {"image.angle", "30", "content rotation (degrees)", "angle"},
              {"model.variant", "tilted", "axis-aligned or tilted", "variant"},
              {"run.seed", "0", "seed", ""}};
  add_model_schema(c.schema);
  c.run = [](Context& ctx) {
    const Settings& s = ctx.settings;
    const ImageModelConfig model = read_model(s);
    const Variant variant = parse_variant(s.get_string("model.variant"));
    const double angle = s.get_double("image.angle");
    const Image img = load_rotated(s.get_string("image.source"), angle, static_cast<int>(s.get_int("image.size")));
    const std::uint64_t seed = ctx.seed ? *ctx.seed : s.get_uint("run.seed");
    const ImageFitResult r = fit_image(img, variant, model, seed, ctx.threads);

    ExperimentReport rep;
    const std::string v = to_string(variant), cell = format_number(angle);
    rep.add("fit_image2d", v, cell, seed, "holdout_psnr", r.holdout_psnr);
    rep.add("fit_image2d", v, cell, seed, "train_psnr", r.train_psnr);
    if (variant == Variant::Tilted) rep.add("fit_image2d", v, cell, seed, "phase1_angle_deg", r.phase1_angle_deg);
    for (std::size_t t = 0; t < r.angles.size(); ++t) {
      rep.add("fit_image2d", v, cell, seed, "transform_deg_" + std::to_string(t),
              r.angles[t] * 180.0 / std::numbers::pi);
    }
    rep.write(ctx.path("fit.csv"));
    write_text(ctx.path("trace.csv"), r.report.trace_csv());
    write_text(ctx.path("summary.csv"), r.report.summary_csv());
    save_checkpoint(ctx.path("field.ckpt"), r.field);

    SampleSet grid = image_samples(img, model.extent);
    const auto pred = predict(r.field, grid, model.train.steps, ctx.threads);
    save_png(ctx.path("target.png"), img);
    save_png(ctx.path("reconstruction.png"), samples_to_image(pred, img.width, img.height, img.channels));
    save_png(ctx.path("features.png"), feature_norm_image(r.field, img.width, img.height, model.extent));
    for (const auto& e : r.report.events) note(e);
  };
  return c;
}

Command fit_sdf_cmd() {
  Command c{"fit-sdf", "regress an analytic SDF with a 3D factored field and report IoU", {}, {}};
  const SdfFitConfig d;
  c.schema = {{"shape.kind", "rotated_box", "sphere, box, rotated_box or union", "shape"},
              {"shape.half_extents", "0.5,0.35,0.25", "box half extents", ""},
              {"shape.radius", "0.6", "sphere radius", ""},
              {"sdf.decomposition", "kplanes", "kplanes, vm or cp3d", "decomposition"},
              {"sdf.tilted", "true", "learn transforms", "tilted"},
              {"sdf.channels", std::to_string(d.channels), "latent channels", ""},
              {"sdf.resolution", std::to_string(d.resolution), "grid nodes per axis", "resolution"},
              {"sdf.transforms", std::to_string(d.transforms), "learned transforms when tilted", ""},
              {"sdf.hidden", join_ints(d.hidden), "decoder hidden widths", ""},
              {"sdf.frequencies", std::to_string(d.frequencies), "Fourier bands per channel", ""},
              {"sdf.grid_init_mean", format_number(d.grid_init_mean), "grid init mean", ""},
              {"sdf.grid_init_scale", format_number(d.grid_init_scale), "grid init half-width", ""},
              {"sdf.train_points", std::to_string(d.train_points), "training samples", "points"},
              {"sdf.uniform_fraction", format_number(d.uniform_fraction), "share of uniform samples", ""},
              {"sdf.near_surface_sigma", format_number(d.near_surface_sigma), "near-surface perturbation", ""},
              {"sdf.eval_resolution", std::to_string(d.eval_resolution), "evaluation lattice per axis", "eval-resolution"},
              {"run.seeds", "0", "seeds (list or a:b range)", "seeds"}};
  add_train_schema(c.schema, d.train, false);
  c.run = [](Context& ctx) {
    const Settings& s = ctx.settings;
    ShapeSpec shape;
    shape.kind = s.get_string("shape.kind");
    const auto he = s.get_doubles("shape.half_extents");
    if (he.size() != 3) throw UsageError("shape.half_extents needs three values");
    shape.half_extents = {he[0], he[1], he[2]};
    shape.radius = s.get_double("shape.radius");
    SdfFitConfig cfg;
    cfg.channels = static_cast<int>(s.get_int("sdf.channels"));
    cfg.resolution = static_cast<int>(s.get_int("sdf.resolution"));
    cfg.transforms = static_cast<int>(s.get_int("sdf.transforms"));
    cfg.hidden = to_ints(s.get_ints("sdf.hidden"));
    cfg.frequencies = static_cast<int>(s.get_int("sdf.frequencies"));
    cfg.grid_init_mean = s.get_double("sdf.grid_init_mean");
    cfg.grid_init_scale = s.get_double("sdf.grid_init_scale");
    const std::int64_t points = s.get_int("sdf.train_points");
    if (points < 2) throw UsageError("sdf.train_points must be >= 2");
    cfg.train_points = static_cast<std::size_t>(points);
    cfg.uniform_fraction = s.get_double("sdf.uniform_fraction");
    cfg.near_surface_sigma = s.get_double("sdf.near_surface_sigma");
    cfg.eval_resolution = static_cast<int>(s.get_int("sdf.eval_resolution"));
    cfg.train = read_train(s, cfg.train, false);
    const std::string dec = s.get_string("sdf.decomposition");
    const DecompositionKind kind = dec == "vm" ? DecompositionKind::VectorMatrix : parse_decomposition(dec);
    const bool tilted = s.get_bool("sdf.tilted");

    ExperimentReport rep;
    const std::string id = "sdf_fit/" + to_string(kind), v = tilted ? "tilted" : "axis-aligned";
    for (std::uint64_t seed : resolve_seeds(ctx, "run.seeds")) {
      const AnalyticSdf sdf = make_shape(shape, seed);
      const SdfFitResult r = fit_sdf(sdf, kind, tilted, cfg, seed, ctx.threads);
      rep.add(id, v, sdf.describe(), seed, "iou", r.iou);
      rep.add(id, v, sdf.describe(), seed, "train_psnr", r.train_psnr);
      rep.add(id, v, sdf.describe(), seed, "eval_mse", r.eval_mse);
      save_checkpoint(ctx.path("field_seed" + std::to_string(seed) + ".ckpt"), r.field);
      for (const auto& e : r.report.events) note(e);
    }
    rep.write(ctx.path("sdf.csv"));
  };
  return c;
}

// ---------------------------------------------------------------------------
// sweeps

std::vector<Series> mean_by_cell(const ExperimentReport& rep, const std::vector<Variant>& variants,
                                 const std::vector<double>& xs, const std::function<std::string(double)>& label) {
  std::vector<Series> out;
  for (Variant v : variants) {
    Series s{to_string(v), {}, {}};
    for (double x : xs) {
      s.x.push_back(x);
      s.y.push_back(mean(rep.values("holdout_psnr", to_string(v), label(x))));
    }
    out.push_back(s);
  }
  return out;
}

std::string default_angle_list() {
  std::string out;
  for (int a = 0; a <= 180; a += 10) out += (a ? "," : "") + std::to_string(a);
  return out;
}

Command sweep_rotation() {
  Command c{"sweep-rotation", "holdout PSNR across image rotations for each variant", {}, {}};
  c.schema = {{"sweep.image", "brick", "brick, stripe, checker or a PNG path", "image"},
              {"sweep.size", "128", "pixels per side", "size"},
              {"sweep.angles", default_angle_list(), "content rotations (degrees, within [0,180])", "angles"},
              {"sweep.seeds", "0:4", "seeds (list or a:b range)", "seeds"},
              {"sweep.variants", "axis-aligned,tilted", "variants", "variants"}};
  add_model_schema(c.schema);
  c.run = [](Context& ctx) {
    const Settings& s = ctx.settings;
    RotationSweepConfig cfg;
    cfg.image = s.get_string("sweep.image");
    cfg.image_size = static_cast<int>(s.get_int("sweep.size"));
    cfg.angles = s.get_doubles("sweep.angles");
    cfg.seeds = resolve_seeds(ctx, "sweep.seeds");
    cfg.variants = parse_variants(s.get_string("sweep.variants"));
    cfg.model = read_model(s);
    cfg.threads = ctx.threads;
    const ExperimentReport rep = rotation_sweep(cfg);
    rep.write(ctx.path("rotation_sweep.csv"));
    save_line_chart(ctx.path("rotation_sweep.png"),
                    mean_by_cell(rep, cfg.variants, cfg.angles, [](double a) { return format_number(a); }));
  };
  return c;
}

Command sweep_resolution() {
  Command c{"sweep-resolution", "holdout PSNR across grid resolutions at a fixed rotation", {}, {}};
  c.schema = {{"sweep.image", "brick", "brick, stripe, checker or a PNG path", "image"},
              {"sweep.size", "128", "pixels per side", "size"},
              {"sweep.angle", "30", "content rotation (degrees)", "angle"},
              {"sweep.resolutions", "32,64,128,256", "grid nodes per axis", "resolutions"},
              {"sweep.seeds", "0", "seeds (list or a:b range)", "seeds"},
              {"sweep.variants", "axis-aligned,tilted", "variants", "variants"}};
  add_model_schema(c.schema);
  c.run = [](Context& ctx) {
    const Settings& s = ctx.settings;
    ResolutionSweepConfig cfg;
    cfg.image = s.get_string("sweep.image");
    cfg.image_size = static_cast<int>(s.get_int("sweep.size"));
    cfg.angle = s.get_double("sweep.angle");
    cfg.resolutions = to_ints(s.get_ints("sweep.resolutions"));
    cfg.seeds = resolve_seeds(ctx, "sweep.seeds");
    cfg.variants = parse_variants(s.get_string("sweep.variants"));
    cfg.model = read_model(s);
    cfg.threads = ctx.threads;
    const ExperimentReport rep = resolution_sweep(cfg);
    rep.write(ctx.path("resolution_sweep.csv"));
    std::vector<double> xs(cfg.resolutions.begin(), cfg.resolutions.end());
    save_line_chart(ctx.path("resolution_sweep.png"),
                    mean_by_cell(rep, cfg.variants, xs, [](double r) { return std::to_string(static_cast<int>(r)); }));
  };
  return c;
}

int run(int argc, char** argv) {
  std::vector<Command> commands{theory_spectrum(), theory_lowrank(), theory_align(), fit_image2d(),
                                fit_sdf_cmd(),     sweep_rotation(), sweep_resolution()};
  CLI::App app{"tilted: transform-invariant factored feature volumes and model-problem oracles", "tilted"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool print_config = false;
  app.add_option("--config", config_path, "config file (sectioned key = value)");
  app.add_option("--out", out_dir, std::string("output directory (default: $") + kOutEnv + " or ./tilted_out)");
  app.add_option("--seed", seed, "seed overriding every seed setting");
  app.add_option("--threads", threads, "worker threads (1 is the deterministic reference)")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

  std::map<std::string, std::map<std::string, std::string>> flag_values;  // command -> key -> value
  std::vector<CLI::App*> subs;
  for (auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->fallthrough();
    for (const auto& o : cmd.schema) {
      if (o.flag.empty()) continue;
      sub->add_option_function<std::string>(
          "--" + o.flag, [&flag_values, name = cmd.name, key = o.key](const std::string& v) { flag_values[name][key] = v; },
          o.help + " [" + o.key + "]");
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    Command& cmd = commands[i];
    try {
      Context ctx;
      ctx.settings = Settings(cmd.schema);
      if (!config_path.empty()) ctx.settings.apply(load_config_file(config_path), config_path);
      for (const auto& [k, v] : flag_values[cmd.name]) ctx.settings.set(k, v);
      if (print_config) {
        std::cout << ctx.settings.dump();
        return 0;
      }
      if (out_dir.empty()) {
        const char* env = std::getenv(kOutEnv);
        out_dir = env && *env ? env : "tilted_out";
      }
      ctx.out = out_dir;
      std::error_code ec;
      fs::create_directories(ctx.out, ec);
      if (ec) throw UsageError("cannot create output directory '" + out_dir + "': " + ec.message());
      ctx.seed = seed;
      ctx.threads = threads;
      cmd.run(ctx);
      return 0;
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const StructuralError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const NumericError& e) {
      std::cerr << "numeric failure: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "failure: " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
