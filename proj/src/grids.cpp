#include "tilted/grids.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "grid_detail.hpp"
#include "tilted/errors.hpp"
#include "tilted/rng.hpp"

namespace tilted {

std::string to_string(DecompositionKind kind) {
  switch (kind) {
    case DecompositionKind::CP2D: return "cp2d";
    case DecompositionKind::CP3D: return "cp3d";
    case DecompositionKind::KPlanes: return "kplanes";
    case DecompositionKind::VectorMatrix: return "vm";
  }
  return "unknown";
}

DecompositionKind parse_decomposition(const std::string& name) {
  if (name == "cp2d") return DecompositionKind::CP2D;
  if (name == "cp3d") return DecompositionKind::CP3D;
  if (name == "kplanes" || name == "triplane") return DecompositionKind::KPlanes;
  if (name == "vm" || name == "vector-matrix") return DecompositionKind::VectorMatrix;
  throw UsageError("unknown decomposition '" + name + "'");
}

FeatureGrid1D::FeatureGrid1D(int resolution_, int channels_)
    : resolution(resolution_), channels(channels_),
      values(static_cast<std::size_t>(resolution_) * channels_, 0.0) {
  if (resolution < 2 || channels < 1) throw StructuralError("FeatureGrid1D: bad shape");
}

FeatureGrid2D::FeatureGrid2D(int height_, int width_, int channels_)
    : height(height_), width(width_), channels(channels_),
      values(static_cast<std::size_t>(height_) * width_ * channels_, 0.0) {
  if (height < 2 || width < 2 || channels < 1) throw StructuralError("FeatureGrid2D: bad shape");
}

LinearStencil linear_stencil(int nodes, double x, BoundaryMode boundary) {
  double slope = 1.0;
  if (boundary == BoundaryMode::Toroidal) {
    x = x - 2.0 * std::floor((x + 1.0) / 2.0);
  } else if (x < -1.0 || x > 1.0) {
    x = std::clamp(x, -1.0, 1.0);
    slope = 0.0;
  }
  const double scale = 0.5 * (nodes - 1);
  const double u = (x + 1.0) * scale;
  int i0 = static_cast<int>(std::floor(u));
  i0 = std::clamp(i0, 0, nodes - 2);
  return {i0, u - i0, slope * scale};
}

namespace {

FactorSlot standalone_slot(int nodes_u, int nodes_v, int rank, int channels) {
  FactorSlot s;
  s.shape.rank = rank;
  s.shape.axes = {0, 1};
  s.shape.nodes = {nodes_u, nodes_v};
  s.channels = channels;
  return s;
}

}  // namespace

std::vector<double> interp_linear(const FeatureGrid1D& grid, double x, BoundaryMode boundary) {
  const FactorSlot s = standalone_slot(grid.resolution, 0, 1, grid.channels);
  std::vector<double> out(grid.channels);
  const double q[3] = {x, 0.0, 0.0};
  detail::interp_slot(s, grid.values.data(), q, boundary, out.data());
  return out;
}

double interp_linear_vjp(const FeatureGrid1D& grid, double x, std::span<const double> grad_out,
                         std::span<double> grad_values, BoundaryMode boundary) {
  if (grad_out.size() != static_cast<std::size_t>(grid.channels) ||
      grad_values.size() != grid.values.size()) {
    throw StructuralError("interp_linear_vjp: shape mismatch");
  }
  const FactorSlot s = standalone_slot(grid.resolution, 0, 1, grid.channels);
  const double q[3] = {x, 0.0, 0.0};
  double gq[3] = {0.0, 0.0, 0.0};
  detail::interp_slot_vjp(s, grid.values.data(), q, boundary, grad_out.data(), grad_values.data(), gq);
  return gq[0];
}

std::vector<double> interp_bilinear(const FeatureGrid2D& grid, Vec2 uv, BoundaryMode boundary) {
  const FactorSlot s = standalone_slot(grid.width, grid.height, 2, grid.channels);
  std::vector<double> out(grid.channels);
  const double q[3] = {uv[0], uv[1], 0.0};
  detail::interp_slot(s, grid.values.data(), q, boundary, out.data());
  return out;
}

Vec2 interp_bilinear_vjp(const FeatureGrid2D& grid, Vec2 uv, std::span<const double> grad_out,
                         std::span<double> grad_values, BoundaryMode boundary) {
  if (grad_out.size() != static_cast<std::size_t>(grid.channels) ||
      grad_values.size() != grid.values.size()) {
    throw StructuralError("interp_bilinear_vjp: shape mismatch");
  }
  const FactorSlot s = standalone_slot(grid.width, grid.height, 2, grid.channels);
  const double q[3] = {uv[0], uv[1], 0.0};
  double gq[3] = {0.0, 0.0, 0.0};
  detail::interp_slot_vjp(s, grid.values.data(), q, boundary, grad_out.data(), grad_values.data(), gq);
  return {gq[0], gq[1]};
}

// ---------------------------------------------------------------------------
// DecompositionSpec

DecompositionSpec DecompositionSpec::make(DecompositionKind kind, int channels, int base_size,
                                          std::vector<double> scales, int transforms) {
  DecompositionSpec spec;
  spec.kind = kind;
  spec.channels = channels;
  spec.transforms = transforms;
  for (double s : scales) {
    const int n = std::max(2, static_cast<int>(std::lround(base_size * s)));
    spec.levels.push_back({s, {n, n, n}});
  }
  spec.validate();
  return spec;
}

int DecompositionSpec::input_dim() const { return kind == DecompositionKind::CP2D ? 2 : 3; }

int DecompositionSpec::factors_per_level() const {
  switch (kind) {
    case DecompositionKind::CP2D: return 2;
    case DecompositionKind::CP3D: return 3;
    case DecompositionKind::KPlanes: return 3;
    case DecompositionKind::VectorMatrix: return 6;
  }
  return 0;
}

int DecompositionSpec::reduce_outputs_per_level() const {
  return kind == DecompositionKind::VectorMatrix ? 3 : 1;
}

int DecompositionSpec::group_latent_dim() const {
  return static_cast<int>(levels.size()) * reduce_outputs_per_level() * group_channels();
}

int DecompositionSpec::slot_count() const {
  return transforms * static_cast<int>(levels.size()) * factors_per_level();
}

void DecompositionSpec::validate() const {
  if (channels < 1) throw StructuralError("decomposition: channels must be >= 1");
  if (transforms < 1) throw StructuralError("decomposition: transform count must be >= 1");
  if (channels % transforms != 0) {
    throw StructuralError("decomposition: transform count " + std::to_string(transforms) +
                          " does not divide channel count " + std::to_string(channels));
  }
  if (levels.empty()) throw StructuralError("decomposition: at least one resolution level required");
  for (std::size_t r = 0; r < levels.size(); ++r) {
    for (int a = 0; a < input_dim(); ++a) {
      if (levels[r].sizes[a] < 2) throw StructuralError("decomposition: grid sizes must be >= 2");
    }
    if (r > 0 && !(levels[r].scale > levels[r - 1].scale)) {
      throw StructuralError("decomposition: resolution scales must be strictly increasing");
    }
  }
}

FactorShape factor_shape(const DecompositionSpec& spec, int level, int factor) {
  static constexpr int kCp[3][2] = {{0, 0}, {1, 0}, {2, 0}};
  static constexpr int kPlanes[3][2] = {{0, 1}, {1, 2}, {0, 2}};
  // x | yz, y | xz, z | xy
  static constexpr int kVm[6][3] = {{1, 0, 0}, {2, 1, 2}, {1, 1, 0}, {2, 0, 2}, {1, 2, 0}, {2, 0, 1}};
  const auto& sizes = spec.levels.at(level).sizes;
  FactorShape s;
  switch (spec.kind) {
    case DecompositionKind::CP2D:
    case DecompositionKind::CP3D:
      s.rank = 1;
      s.axes = {kCp[factor][0], 0};
      break;
    case DecompositionKind::KPlanes:
      s.rank = 2;
      s.axes = {kPlanes[factor][0], kPlanes[factor][1]};
      break;
    case DecompositionKind::VectorMatrix:
      s.rank = kVm[factor][0];
      s.axes = {kVm[factor][1], kVm[factor][2]};
      break;
  }
  s.nodes = {sizes[s.axes[0]], s.rank == 2 ? sizes[s.axes[1]] : 1};
  return s;
}

ProjectedCoord project(const DecompositionSpec& spec, int factor, const Mat3& rotation,
                       std::span<const double> p) {
  if (static_cast<int>(p.size()) != spec.input_dim()) {
    throw StructuralError("project: point dimension mismatch");
  }
  double q[3];
  detail::rotate(rotation, p.data(), spec.input_dim(), q);
  const FactorShape s = factor_shape(spec, 0, factor);
  ProjectedCoord out;
  out.rank = s.rank;
  out.uv = {q[s.axes[0]], s.rank == 2 ? q[s.axes[1]] : 0.0};
  return out;
}

std::vector<double> reduce(const DecompositionSpec& spec,
                           std::span<const std::vector<double>> latents) {
  const int F = spec.factors_per_level();
  const int R = static_cast<int>(spec.levels.size());
  const int C = spec.group_channels();
  if (static_cast<int>(latents.size()) != R * F) {
    throw StructuralError("reduce: expected " + std::to_string(R * F) + " factor latents, got " +
                          std::to_string(latents.size()));
  }
  for (const auto& l : latents) {
    if (static_cast<int>(l.size()) != C) throw StructuralError("reduce: latent channel mismatch");
  }
  std::vector<double> out;
  out.reserve(spec.group_latent_dim());
  for (int r = 0; r < R; ++r) {
    const auto* base = &latents[static_cast<std::size_t>(r) * F];
    if (spec.kind == DecompositionKind::VectorMatrix) {
      for (int k = 0; k < 3; ++k)
        for (int c = 0; c < C; ++c) out.push_back(base[2 * k][c] * base[2 * k + 1][c]);
    } else {
      for (int c = 0; c < C; ++c) {
        double prod = 1.0;
        for (int f = 0; f < F; ++f) prod *= base[f][c];
        out.push_back(prod);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// TransformSet

TransformSet::TransformSet(std::vector<UnitRotation2> planar) : rotations_(std::move(planar)) {}
TransformSet::TransformSet(std::vector<UnitQuaternion> spatial) : rotations_(std::move(spatial)) {}

TransformSet TransformSet::identity(int dim, int count) {
  if (dim == 2) return TransformSet(std::vector<UnitRotation2>(count));
  return TransformSet(std::vector<UnitQuaternion>(count));
}

TransformSet TransformSet::random(int dim, int count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7a75));
  if (dim == 2) {
    std::vector<UnitRotation2> r(count);
    for (auto& x : r) x = UnitRotation2::from_angle(rng.uniform(0.0, 2.0 * std::numbers::pi));
    return TransformSet(std::move(r));
  }
  std::vector<UnitQuaternion> q(count);
  for (auto& x : q) {
    UnitQuaternion v{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double n = v.norm();
    x = UnitQuaternion{v.w / n, v.x / n, v.y / n, v.z / n}.canonical();
  }
  return TransformSet(std::move(q));
}

int TransformSet::dim() const { return planar() ? 2 : 3; }

int TransformSet::size() const {
  return std::visit([](const auto& v) { return static_cast<int>(v.size()); }, rotations_);
}

std::vector<UnitRotation2>& TransformSet::planar_rotations() {
  return std::get<std::vector<UnitRotation2>>(rotations_);
}
const std::vector<UnitRotation2>& TransformSet::planar_rotations() const {
  return std::get<std::vector<UnitRotation2>>(rotations_);
}
std::vector<UnitQuaternion>& TransformSet::spatial_rotations() {
  return std::get<std::vector<UnitQuaternion>>(rotations_);
}
const std::vector<UnitQuaternion>& TransformSet::spatial_rotations() const {
  return std::get<std::vector<UnitQuaternion>>(rotations_);
}

Mat3 TransformSet::matrix(int t) const {
  if (planar()) return rotation_matrix(planar_rotations().at(t));
  return rotation_matrix(spatial_rotations().at(t));
}

std::vector<Mat3> TransformSet::matrices() const {
  std::vector<Mat3> out(size());
  for (int t = 0; t < size(); ++t) out[t] = matrix(t);
  return out;
}

std::vector<double> TransformSet::tangent_gradients(std::span<const Mat3> dL_dR) const {
  if (static_cast<int>(dL_dR.size()) != size()) {
    throw StructuralError("tangent_gradients: one matrix gradient per transform required");
  }
  std::vector<double> out;
  out.reserve(size() * tangent_dim());
  for (int t = 0; t < size(); ++t) {
    if (planar()) {
      const auto& r = planar_rotations()[t];
      const Vec2 amb = rotation_matrix_grad_to_ambient(r, dL_dR[t]);
      out.push_back(euclidean_to_tangent(r, amb));
    } else {
      const auto& q = spatial_rotations()[t];
      const Vec4 amb = rotation_matrix_grad_to_ambient(q, dL_dR[t]);
      const Vec3 xi = euclidean_to_tangent(q, amb);
      out.insert(out.end(), xi.begin(), xi.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FactoredVolume

FactoredVolume::FactoredVolume(DecompositionSpec spec, TransformSet transforms)
    : spec_(std::move(spec)), transforms_(std::move(transforms)) {
  spec_.validate();
  if (transforms_.size() != spec_.transforms) {
    throw StructuralError("volume: transform set size " + std::to_string(transforms_.size()) +
                          " does not match spec T=" + std::to_string(spec_.transforms));
  }
  if (transforms_.dim() != spec_.input_dim()) {
    throw StructuralError("volume: transform dimension does not match decomposition input");
  }
  const int R = static_cast<int>(spec_.levels.size());
  const int F = spec_.factors_per_level();
  const int C = spec_.group_channels();
  std::size_t offset = 0;
  for (int t = 0; t < spec_.transforms; ++t)
    for (int r = 0; r < R; ++r)
      for (int f = 0; f < F; ++f) {
        FactorSlot s;
        s.transform = t;
        s.level = r;
        s.factor = f;
        s.shape = factor_shape(spec_, r, f);
        s.channels = C;
        s.offset = offset;
        s.size = static_cast<std::size_t>(s.shape.nodes[0]) * s.shape.nodes[1] * C;
        offset += s.size;
        slots_.push_back(s);
      }
  params_.assign(offset, 0.0);
}

void FactoredVolume::randomize(std::uint64_t seed, double init_scale, double init_mean) {
  Rng rng(derive_seed(seed, 0x6772));
  for (double& v : params_) v = init_mean + rng.uniform(-init_scale, init_scale);
}

void FactoredVolume::fill(double value) { std::fill(params_.begin(), params_.end(), value); }

const FactorSlot& FactoredVolume::slot(int transform, int level, int factor) const {
  const int R = static_cast<int>(spec_.levels.size());
  const int F = spec_.factors_per_level();
  return slots_.at((static_cast<std::size_t>(transform) * R + level) * F + factor);
}

FeatureGrid1D FactoredVolume::grid1d(const FactorSlot& s) const {
  if (s.shape.rank != 1) throw StructuralError("grid1d: slot is a plane");
  FeatureGrid1D g(s.shape.nodes[0], s.channels);
  std::copy_n(params_.begin() + s.offset, s.size, g.values.begin());
  return g;
}

FeatureGrid2D FactoredVolume::grid2d(const FactorSlot& s) const {
  if (s.shape.rank != 2) throw StructuralError("grid2d: slot is a vector");
  FeatureGrid2D g(s.shape.nodes[1], s.shape.nodes[0], s.channels);
  std::copy_n(params_.begin() + s.offset, s.size, g.values.begin());
  return g;
}

// ---------------------------------------------------------------------------
// Query

std::vector<double> query(const FactoredVolume& volume, std::span<const double> p) {
  const auto& spec = volume.spec();
  const int dim = spec.input_dim();
  if (static_cast<int>(p.size()) != dim) throw StructuralError("query: point dimension mismatch");
  const int T = spec.transforms;
  const int R = static_cast<int>(spec.levels.size());
  const int F = spec.factors_per_level();
  const int C = spec.group_channels();
  std::vector<double> out;
  out.reserve(spec.latent_dim());
  std::vector<std::vector<double>> latents(static_cast<std::size_t>(R) * F, std::vector<double>(C));
  const auto params = volume.parameters();
  for (int t = 0; t < T; ++t) {
    double q[3];
    detail::rotate(volume.transforms().matrix(t), p.data(), dim, q);
    for (int r = 0; r < R; ++r)
      for (int f = 0; f < F; ++f) {
        const FactorSlot& s = volume.slot(t, r, f);
        detail::interp_slot(s, params.data() + s.offset, q, spec.boundary,
                            latents[static_cast<std::size_t>(r) * F + f].data());
      }
    const auto z = reduce(spec, latents);
    out.insert(out.end(), z.begin(), z.end());
  }
  return out;
}

QueryGradients::QueryGradients(const FactoredVolume& volume)
    : params(volume.parameter_count(), 0.0),
      rotation(volume.spec().transforms, Mat3{}),
      point(volume.spec().input_dim(), 0.0) {}

void QueryGradients::zero() {
  std::fill(params.begin(), params.end(), 0.0);
  std::fill(rotation.begin(), rotation.end(), Mat3{});
  std::fill(point.begin(), point.end(), 0.0);
}

void query_vjp(const FactoredVolume& volume, std::span<const double> p,
               std::span<const double> grad_latent, QueryGradients& grads) {
  const auto& spec = volume.spec();
  const int dim = spec.input_dim();
  const int T = spec.transforms;
  const int R = static_cast<int>(spec.levels.size());
  const int F = spec.factors_per_level();
  const int C = spec.group_channels();
  const int G = spec.group_latent_dim();
  if (static_cast<int>(p.size()) != dim || static_cast<int>(grad_latent.size()) != spec.latent_dim()) {
    throw StructuralError("query_vjp: shape mismatch");
  }
  const auto params = volume.parameters();
  std::vector<double> lat(static_cast<std::size_t>(F) * C);
  std::vector<double> dlat(C);
  for (int t = 0; t < T; ++t) {
    const Mat3 Rt = volume.transforms().matrix(t);
    double q[3];
    detail::rotate(Rt, p.data(), dim, q);
    double gq[3] = {0.0, 0.0, 0.0};
    for (int r = 0; r < R; ++r) {
      for (int f = 0; f < F; ++f) {
        const FactorSlot& s = volume.slot(t, r, f);
        detail::interp_slot(s, params.data() + s.offset, q, spec.boundary, lat.data() + f * C);
      }
      const double* dz = grad_latent.data() + static_cast<std::size_t>(t) * G +
                         static_cast<std::size_t>(r) * spec.reduce_outputs_per_level() * C;
      for (int f = 0; f < F; ++f) {
        if (spec.kind == DecompositionKind::VectorMatrix) {
          const int k = f / 2;
          const int partner = f ^ 1;
          for (int c = 0; c < C; ++c) dlat[c] = dz[k * C + c] * lat[partner * C + c];
        } else {
          for (int c = 0; c < C; ++c) {
            double prod = dz[c];
            for (int o = 0; o < F; ++o)
              if (o != f) prod *= lat[o * C + c];
            dlat[c] = prod;
          }
        }
        const FactorSlot& s = volume.slot(t, r, f);
        detail::interp_slot_vjp(s, params.data() + s.offset, q, spec.boundary, dlat.data(),
                                grads.params.data() + s.offset, gq);
      }
    }
    detail::accumulate_outer(grads.rotation[t], gq, p.data(), dim);
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < 3; ++i) grads.point[j] += Rt[i][j] * gq[i];
  }
}

// ---------------------------------------------------------------------------
// Contraction and regularizers

std::vector<double> contract(std::span<const double> p) {
  double linf = 0.0;
  for (double v : p) linf = std::max(linf, std::abs(v));
  std::vector<double> out(p.begin(), p.end());
  if (linf <= 1.0) return out;
  const double s = (2.0 - 1.0 / linf) / linf;
  for (double& v : out) v *= s;
  return out;
}

double tv_regularizer(const FeatureGrid1D& grid, std::span<double> grad) {
  const int n = grid.resolution, C = grid.channels;
  const double norm = 1.0 / (static_cast<double>(C) * (n - 1));
  double sum = 0.0;
  for (int i = 0; i + 1 < n; ++i)
    for (int c = 0; c < C; ++c) {
      const double d = grid.at(i + 1, c) - grid.at(i, c);
      sum += d * d;
      if (!grad.empty()) {
        grad[static_cast<std::size_t>(i + 1) * C + c] += 2.0 * d * norm;
        grad[static_cast<std::size_t>(i) * C + c] -= 2.0 * d * norm;
      }
    }
  return sum * norm;
}

double tv_regularizer(const FeatureGrid2D& grid, std::span<double> grad) {
  const int H = grid.height, W = grid.width, C = grid.channels;
  const double pairs = static_cast<double>(H - 1) * W + static_cast<double>(H) * (W - 1);
  const double norm = 1.0 / (pairs * C);
  double sum = 0.0;
  auto idx = [&](int v, int u, int c) { return (static_cast<std::size_t>(v) * W + u) * C + c; };
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u)
      for (int c = 0; c < C; ++c) {
        const double here = grid.values[idx(v, u, c)];
        if (u + 1 < W) {
          const double d = grid.values[idx(v, u + 1, c)] - here;
          sum += d * d;
          if (!grad.empty()) {
            grad[idx(v, u + 1, c)] += 2.0 * d * norm;
            grad[idx(v, u, c)] -= 2.0 * d * norm;
          }
        }
        if (v + 1 < H) {
          const double d = grid.values[idx(v + 1, u, c)] - here;
          sum += d * d;
          if (!grad.empty()) {
            grad[idx(v + 1, u, c)] += 2.0 * d * norm;
            grad[idx(v, u, c)] -= 2.0 * d * norm;
          }
        }
      }
  return sum * norm;
}

double tv_regularizer(const FactoredVolume& volume, std::span<double> grad, double weight) {
  const auto& slots = volume.slots();
  const double per_slot = 1.0 / static_cast<double>(slots.size());
  const auto params = volume.parameters();
  double total = 0.0;
  std::vector<double> local;
  for (const auto& s : slots) {
    if (!grad.empty()) local.assign(s.size, 0.0);
    double tv;
    if (s.shape.rank == 1) {
      FeatureGrid1D g;
      g.resolution = s.shape.nodes[0];
      g.channels = s.channels;
      g.values.assign(params.begin() + s.offset, params.begin() + s.offset + s.size);
      tv = tv_regularizer(g, local);
    } else {
      FeatureGrid2D g;
      g.width = s.shape.nodes[0];
      g.height = s.shape.nodes[1];
      g.channels = s.channels;
      g.values.assign(params.begin() + s.offset, params.begin() + s.offset + s.size);
      tv = tv_regularizer(g, local);
    }
    total += tv * per_slot;
    if (!grad.empty())
      for (std::size_t i = 0; i < s.size; ++i) grad[s.offset + i] += weight * per_slot * local[i];
  }
  return total;
}

double l21_regularizer(const FactoredVolume& volume, std::span<double> grad, double weight) {
  const auto params = volume.parameters();
  double total = 0.0;
  for (const auto& s : volume.slots()) {
    double sq = 0.0;
    for (std::size_t i = 0; i < s.size; ++i) sq += params[s.offset + i] * params[s.offset + i];
    const double n = std::sqrt(sq);
    total += n;
    if (!grad.empty() && n > 0.0)
      for (std::size_t i = 0; i < s.size; ++i) grad[s.offset + i] += weight * params[s.offset + i] / n;
  }
  return total;
}

}  // namespace tilted
