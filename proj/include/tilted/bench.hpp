#pragma once

// Desk-scale experiments: 2D rotation and grid-resolution sweeps on images,
// analytic SDF fitting with IoU.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tilted/csv.hpp"
#include "tilted/field.hpp"
#include "tilted/image.hpp"
#include "tilted/sdf.hpp"
#include "tilted/train.hpp"

namespace tilted {

enum class Variant { AxisAligned, Tilted };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::vector<Variant> parse_variants(const std::string& list);

// 2D CP model. Axis-aligned: one identity transform, all channels.
// TILTED: `transforms` learned rotations, recovered by a channel-limited
// bottleneck phase when two_phase is set.
struct ImageModelConfig {
  int channels = 64;
  int resolution = 128;
  int transforms = 8;
  std::vector<int> hidden{32, 32};
  int frequencies = 4;
  // Pixel coordinates span [-extent, extent]^2; 1/sqrt(2) keeps every
  // rotated coordinate inside the grid.
  double extent = 0.70710678118654752440;
  bool two_phase = true;
  int bottleneck_channels = 16;
  TrainConfig train = default_train();

  static TrainConfig default_train();
  void validate() const;
};

struct ImageFitResult {
  double train_psnr = 0.0;
  double holdout_psnr = 0.0;
  std::vector<double> angles;       // final transform angles (radians)
  double phase1_angle_deg = 0.0;    // dominant bottleneck transform, content frame, [0, 90)
  TransformSet bottleneck_transforms;
  TransformSet initial_transforms;  // tau_init of the full field
  HybridField field;
  TrainReport report;
};

// 50/50 pixel holdout split by seed; trains on one half, reports PSNR on the other.
ImageFitResult fit_image(const Image& image, Variant variant, const ImageModelConfig& model,
                         std::uint64_t seed, int threads = 1);

// Content-frame rotation of the transform whose factor group holds the most
// grid energy, folded to [0, 90) degrees. A field rotated by +a (content)
// is aligned by coordinate transform -a.
double dominant_content_angle(const HybridField& field);
double fold_degrees(double deg, double period = 90.0);

struct RotationSweepConfig {
  std::string image = "brick";  // procedural name or PNG path
  int image_size = 128;
  std::vector<double> angles = default_angles();
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<Variant> variants{Variant::AxisAligned, Variant::Tilted};
  ImageModelConfig model;
  int threads = 1;  // worker pool over cells

  static std::vector<double> default_angles();  // 0, 10, ..., 180
  void validate() const;
};

// Rows: holdout_psnr and train_psnr per (variant, angle, seed); per (variant,
// seed) psnr_mean/psnr_std/psnr_range across angles in cell "all".
ExperimentReport rotation_sweep(const RotationSweepConfig& cfg);

struct ResolutionSweepConfig {
  std::string image = "brick";
  int image_size = 128;
  double angle = 30.0;
  std::vector<int> resolutions{32, 64, 128, 256};
  std::vector<std::uint64_t> seeds{0};
  std::vector<Variant> variants{Variant::AxisAligned, Variant::Tilted};
  ImageModelConfig model;
  int threads = 1;

  void validate() const;
};

// Rows: holdout_psnr, train_psnr, parameters per (variant, resolution, seed).
ExperimentReport resolution_sweep(const ResolutionSweepConfig& cfg);

// |pred <= 0 and gt <= 0| / |pred <= 0 or gt <= 0|; 1 when both interiors are empty.
double iou(std::span<const double> pred, std::span<const double> gt);

struct ShapeSpec {
  std::string kind = "rotated_box";  // sphere, box, rotated_box, union
  Vec3 half_extents{0.5, 0.35, 0.25};
  double radius = 0.6;
};
// rotated_box draws its rotation from the seed; union joins a box and a
// sphere.
AnalyticSdf make_shape(const ShapeSpec& spec, std::uint64_t seed);

struct SdfFitConfig {
  int channels = 20;
  int resolution = 32;
  int transforms = 5;
  std::vector<int> hidden{64, 64, 64};
  int frequencies = 2;
  double grid_init_mean = 0.5;
  double grid_init_scale = 0.2;
  std::size_t train_points = 200000;
  double uniform_fraction = 0.5;
  double near_surface_sigma = 0.01;
  int eval_resolution = 64;
  TrainConfig train = default_train();

  static TrainConfig default_train();
  void validate() const;
};

struct SdfFitResult {
  double iou = 0.0;
  double train_psnr = 0.0;
  double eval_mse = 0.0;
  std::size_t parameters = 0;
  HybridField field;
  TrainReport report;
};

SdfFitResult fit_sdf(const AnalyticSdf& shape, DecompositionKind kind, bool tilted, const SdfFitConfig& cfg,
                     std::uint64_t seed, int threads = 1);

// Rows: iou, train_psnr, eval_mse per seed; the shape is rebuilt per seed.
ExperimentReport sdf_fit(const ShapeSpec& shape, DecompositionKind kind, bool tilted, const SdfFitConfig& cfg,
                         const std::vector<std::uint64_t>& seeds, int threads = 1);

// l2 norm of the interpolated latent at each pixel, scaled to [0,1].
Image feature_norm_image(const HybridField& field, int width, int height, double extent);

// Median and sample standard deviation helpers.
double median(std::vector<double> v);
double sample_std(const std::vector<double>& v);
double mean(const std::vector<double>& v);

}  // namespace tilted
