#pragma once

// Factored feature volumes. A volume evaluates
//
//   Z = concat_t Reduce([Interp_{F_{t,f}}(Proj_f(R_t p))]_f)
//
// where each transform group t owns its own copy of every factor grid with
// c / T channels. With T = 1 and R_1 = I this is the plain axis-aligned
// decomposition.
//
// Grid convention: node i of an n-node axis sits at -1 + 2 i / (n - 1).
// Values are stored node-major, channel-minor; 2D grids are indexed
// [v][u][channel] where u is the first projected coordinate.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tilted/geometry.hpp"

namespace tilted {

enum class DecompositionKind : std::uint32_t { CP2D = 0, CP3D = 1, KPlanes = 2, VectorMatrix = 3 };
enum class BoundaryMode : std::uint32_t { Clamp = 0, Toroidal = 1 };

std::string to_string(DecompositionKind kind);
DecompositionKind parse_decomposition(const std::string& name);

struct FeatureGrid1D {
  int resolution = 2;
  int channels = 1;
  std::vector<double> values;  // resolution * channels

  FeatureGrid1D() = default;
  FeatureGrid1D(int resolution, int channels);
  double& at(int i, int c) { return values[static_cast<std::size_t>(i) * channels + c]; }
  double at(int i, int c) const { return values[static_cast<std::size_t>(i) * channels + c]; }
};

struct FeatureGrid2D {
  int height = 2;  // nodes along v
  int width = 2;   // nodes along u
  int channels = 1;
  std::vector<double> values;  // height * width * channels

  FeatureGrid2D() = default;
  FeatureGrid2D(int height, int width, int channels);
  double& at(int iv, int iu, int c) {
    return values[(static_cast<std::size_t>(iv) * width + iu) * channels + c];
  }
  double at(int iv, int iu, int c) const {
    return values[(static_cast<std::size_t>(iv) * width + iu) * channels + c];
  }
};

// Two-node interpolation stencil along one axis: value = (1-w) v[i0] + w v[i0+1].
struct LinearStencil {
  int i0 = 0;
  double w = 0.0;
  double dw_dx = 0.0;  // zero when the coordinate was clamped
};

LinearStencil linear_stencil(int nodes, double x, BoundaryMode boundary);

std::vector<double> interp_linear(const FeatureGrid1D& grid, double x,
                                  BoundaryMode boundary = BoundaryMode::Clamp);
// Vector-Jacobian product: accumulates dL/dvalues into grad_values (same
// layout as grid.values) and returns dL/dx.
double interp_linear_vjp(const FeatureGrid1D& grid, double x, std::span<const double> grad_out,
                         std::span<double> grad_values,
                         BoundaryMode boundary = BoundaryMode::Clamp);

std::vector<double> interp_bilinear(const FeatureGrid2D& grid, Vec2 uv,
                                    BoundaryMode boundary = BoundaryMode::Clamp);
Vec2 interp_bilinear_vjp(const FeatureGrid2D& grid, Vec2 uv, std::span<const double> grad_out,
                         std::span<double> grad_values,
                         BoundaryMode boundary = BoundaryMode::Clamp);

struct ResolutionLevel {
  double scale = 1.0;
  std::array<int, 3> sizes{2, 2, 2};  // nodes along x, y, z
};

struct DecompositionSpec {
  DecompositionKind kind = DecompositionKind::CP2D;
  int channels = 1;  // c, summed over transform groups
  std::vector<ResolutionLevel> levels;
  int transforms = 1;  // T; must divide c
  BoundaryMode boundary = BoundaryMode::Clamp;

  // Levels with sizes round(base_size * s) for each scale s.
  static DecompositionSpec make(DecompositionKind kind, int channels, int base_size,
                                std::vector<double> scales = {1.0}, int transforms = 1);

  int input_dim() const;
  int factors_per_level() const;
  int reduce_outputs_per_level() const;  // 1, or 3 for vector-matrix
  int group_channels() const { return channels / transforms; }
  int group_latent_dim() const;
  int latent_dim() const { return group_latent_dim() * transforms; }
  int slot_count() const;
  void validate() const;  // throws StructuralError
};

struct FactorShape {
  int rank = 1;                  // 1 (vector) or 2 (plane)
  std::array<int, 2> axes{0, 0};  // input axes selected by the projection
  std::array<int, 2> nodes{2, 2}; // nodes along (u, v)
};

FactorShape factor_shape(const DecompositionSpec& spec, int level, int factor);

// Rotate, then select the factor's axes. Output is in normalized grid
// coordinates; the level's scale is realized by its node count.
struct ProjectedCoord {
  int rank = 1;
  Vec2 uv{0.0, 0.0};
};
ProjectedCoord project(const DecompositionSpec& spec, int factor, const Mat3& rotation,
                       std::span<const double> p);

// Reduce one transform group's factor latents (level-major, factor-minor,
// each of length group_channels) to the group latent.
std::vector<double> reduce(const DecompositionSpec& spec,
                           std::span<const std::vector<double>> per_factor_latents);

class TransformSet {
 public:
  TransformSet() = default;
  explicit TransformSet(std::vector<UnitRotation2> planar);
  explicit TransformSet(std::vector<UnitQuaternion> spatial);

  static TransformSet identity(int dim, int count);
  static TransformSet random(int dim, int count, std::uint64_t seed);

  int dim() const;  // 2 or 3
  int size() const;
  int tangent_dim() const { return dim() == 2 ? 1 : 3; }
  bool planar() const { return std::holds_alternative<std::vector<UnitRotation2>>(rotations_); }

  std::vector<UnitRotation2>& planar_rotations();
  const std::vector<UnitRotation2>& planar_rotations() const;
  std::vector<UnitQuaternion>& spatial_rotations();
  const std::vector<UnitQuaternion>& spatial_rotations() const;

  Mat3 matrix(int t) const;
  std::vector<Mat3> matrices() const;

  // Right-trivialized tangent gradients (flattened, tangent_dim per
  // transform) from gradients with respect to rotation-matrix entries.
  std::vector<double> tangent_gradients(std::span<const Mat3> dL_dR) const;

  friend bool operator==(const TransformSet&, const TransformSet&) = default;

 private:
  std::variant<std::vector<UnitRotation2>, std::vector<UnitQuaternion>> rotations_;
};

// One factor grid inside the volume's flat parameter vector.
struct FactorSlot {
  int transform = 0;
  int level = 0;
  int factor = 0;
  FactorShape shape;
  int channels = 1;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class FactoredVolume {
 public:
  FactoredVolume() = default;
  FactoredVolume(DecompositionSpec spec, TransformSet transforms);

  // Grid values init_mean + uniform(-init_scale, init_scale).
  void randomize(std::uint64_t seed, double init_scale = 0.1, double init_mean = 0.0);
  void fill(double value);

  const DecompositionSpec& spec() const { return spec_; }
  const std::vector<FactorSlot>& slots() const { return slots_; }
  const FactorSlot& slot(int transform, int level, int factor) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  TransformSet& transforms() { return transforms_; }
  const TransformSet& transforms() const { return transforms_; }

  FeatureGrid1D grid1d(const FactorSlot& slot) const;
  FeatureGrid2D grid2d(const FactorSlot& slot) const;

 private:
  DecompositionSpec spec_;
  TransformSet transforms_;
  std::vector<FactorSlot> slots_;
  std::vector<double> params_;
};

// Single-point query and its vector-Jacobian product. These are the
// reference semantics; grid_kernels.hpp holds the batched versions.
std::vector<double> query(const FactoredVolume& volume, std::span<const double> p);

struct QueryGradients {
  std::vector<double> params;  // same layout as volume.parameters()
  std::vector<Mat3> rotation;  // dL/dR_t
  std::vector<double> point;   // dL/dp

  explicit QueryGradients(const FactoredVolume& volume);
  void zero();
};

void query_vjp(const FactoredVolume& volume, std::span<const double> p,
               std::span<const double> grad_latent, QueryGradients& grads);

// l_inf scene contraction into the open box (-2, 2)^n.
std::vector<double> contract(std::span<const double> p);

// Mean over channels and adjacent node pairs of squared differences.
double tv_regularizer(const FeatureGrid1D& grid, std::span<double> grad_values = {});
double tv_regularizer(const FeatureGrid2D& grid, std::span<double> grad_values = {});
// Mean of per-slot TV over all factor grids of the volume. grad (optional)
// is accumulated with the given weight.
double tv_regularizer(const FactoredVolume& volume, std::span<double> grad = {}, double weight = 1.0);

// Sum over (transform, level, factor) slots of the slot's l2 norm.
double l21_regularizer(const FactoredVolume& volume, std::span<double> grad = {},
                       double weight = 1.0);

}  // namespace tilted
