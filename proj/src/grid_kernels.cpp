#include "tilted/grid_kernels.hpp"

#include <omp.h>

#include <algorithm>

#include "grid_detail.hpp"
#include "tilted/errors.hpp"

namespace tilted {

namespace {

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

void check_batch(const FactoredVolume& volume, std::span<const double> points,
                 std::size_t latent_size) {
  const auto& spec = volume.spec();
  const std::size_t dim = spec.input_dim();
  if (points.size() % dim != 0) throw StructuralError("query_batch: ragged point buffer");
  const std::size_t batch = points.size() / dim;
  if (latent_size != batch * spec.latent_dim()) {
    throw StructuralError("query_batch: latent buffer has wrong size");
  }
}

}  // namespace

void query_batch(const FactoredVolume& volume, std::span<const double> points,
                 std::span<double> latent_out, QueryCache* cache, int threads) {
  check_batch(volume, points, latent_out.size());
  const auto& spec = volume.spec();
  const int dim = spec.input_dim();
  const long batch = static_cast<long>(points.size() / dim);
  const int T = spec.transforms;
  const int R = static_cast<int>(spec.levels.size());
  const int F = spec.factors_per_level();
  const int C = spec.group_channels();
  const int S = spec.slot_count();
  const int D = spec.latent_dim();
  const int outputs = spec.reduce_outputs_per_level();
  const bool vm = spec.kind == DecompositionKind::VectorMatrix;
  const std::vector<Mat3> rot = volume.transforms().matrices();
  const double* params = volume.parameters().data();
  const auto& slots = volume.slots();

  if (cache) {
    cache->batch = static_cast<std::size_t>(batch);
    cache->latents.resize(static_cast<std::size_t>(batch) * S * C);
  }

#pragma omp parallel num_threads(resolve_threads(threads))
  {
    std::vector<double> scratch(static_cast<std::size_t>(S) * C);
#pragma omp for schedule(static)
    for (long b = 0; b < batch; ++b) {
      const double* p = points.data() + static_cast<std::size_t>(b) * dim;
      double* lat = cache ? cache->latents.data() + static_cast<std::size_t>(b) * S * C : scratch.data();
      double* z = latent_out.data() + static_cast<std::size_t>(b) * D;
      for (int t = 0; t < T; ++t) {
        double q[3];
        detail::rotate(rot[t], p, dim, q);
        for (int r = 0; r < R; ++r) {
          const int first = (t * R + r) * F;
          for (int f = 0; f < F; ++f) {
            const FactorSlot& s = slots[first + f];
            detail::interp_slot(s, params + s.offset, q, spec.boundary,
                                lat + static_cast<std::size_t>(first + f) * C);
          }
          const double* l = lat + static_cast<std::size_t>(first) * C;
          double* zr = z + (static_cast<std::size_t>(t) * R + r) * outputs * C;
          if (vm) {
            for (int k = 0; k < 3; ++k)
              for (int c = 0; c < C; ++c) zr[k * C + c] = l[(2 * k) * C + c] * l[(2 * k + 1) * C + c];
          } else {
            for (int c = 0; c < C; ++c) {
              double prod = l[c];
              for (int f = 1; f < F; ++f) prod *= l[f * C + c];
              zr[c] = prod;
            }
          }
        }
      }
    }
  }
}

void query_batch_vjp(const FactoredVolume& volume, std::span<const double> points,
                     const QueryCache& cache, std::span<const double> grad_latent,
                     std::span<double> grad_params, std::span<Mat3> grad_rotation, int threads) {
  check_batch(volume, points, grad_latent.size());
  const auto& spec = volume.spec();
  const int dim = spec.input_dim();
  const long batch = static_cast<long>(points.size() / dim);
  const int R = static_cast<int>(spec.levels.size());
  const int F = spec.factors_per_level();
  const int C = spec.group_channels();
  const int S = spec.slot_count();
  const int D = spec.latent_dim();
  const int outputs = spec.reduce_outputs_per_level();
  const bool vm = spec.kind == DecompositionKind::VectorMatrix;
  if (cache.batch != static_cast<std::size_t>(batch) ||
      cache.latents.size() != static_cast<std::size_t>(batch) * S * C) {
    throw StructuralError("query_batch_vjp: cache does not match batch");
  }
  if (grad_params.size() != volume.parameter_count() ||
      static_cast<int>(grad_rotation.size()) != spec.transforms) {
    throw StructuralError("query_batch_vjp: gradient buffer has wrong size");
  }
  const std::vector<Mat3> rot = volume.transforms().matrices();
  const double* params = volume.parameters().data();
  const auto& slots = volume.slots();
  std::vector<Mat3> slot_rotation_grad(S, Mat3{});

#pragma omp parallel num_threads(resolve_threads(threads))
  {
    std::vector<double> dlat(C);
#pragma omp for schedule(dynamic, 1)
    for (int si = 0; si < S; ++si) {
      const FactorSlot& s = slots[si];
      const int t = s.transform, r = s.level, f = s.factor;
      const int first = (t * R + r) * F;
      Mat3 G{};
      for (long b = 0; b < batch; ++b) {
        const double* p = points.data() + static_cast<std::size_t>(b) * dim;
        const double* lat = cache.latents.data() + (static_cast<std::size_t>(b) * S + first) * C;
        const double* dz = grad_latent.data() + static_cast<std::size_t>(b) * D +
                           (static_cast<std::size_t>(t) * R + r) * outputs * C;
        if (vm) {
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
        double q[3];
        detail::rotate(rot[t], p, dim, q);
        double gq[3] = {0.0, 0.0, 0.0};
        detail::interp_slot_vjp(s, params + s.offset, q, spec.boundary, dlat.data(),
                                grad_params.data() + s.offset, gq);
        detail::accumulate_outer(G, gq, p, dim);
      }
      slot_rotation_grad[si] = G;
    }
  }
  for (int si = 0; si < S; ++si) {
    Mat3& out = grad_rotation[slots[si].transform];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out[i][j] += slot_rotation_grad[si][i][j];
  }
}

namespace reference {

void query_batch(const FactoredVolume& volume, std::span<const double> points,
                 std::span<double> latent_out) {
  check_batch(volume, points, latent_out.size());
  const int dim = volume.spec().input_dim();
  const int D = volume.spec().latent_dim();
  const std::size_t batch = points.size() / dim;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto z = query(volume, points.subspan(b * dim, dim));
    std::copy(z.begin(), z.end(), latent_out.begin() + b * D);
  }
}

void query_batch_vjp(const FactoredVolume& volume, std::span<const double> points,
                     std::span<const double> grad_latent, std::span<double> grad_params,
                     std::span<Mat3> grad_rotation) {
  check_batch(volume, points, grad_latent.size());
  const int dim = volume.spec().input_dim();
  const int D = volume.spec().latent_dim();
  const std::size_t batch = points.size() / dim;
  QueryGradients g(volume);
  for (std::size_t b = 0; b < batch; ++b) {
    query_vjp(volume, points.subspan(b * dim, dim), grad_latent.subspan(b * D, D), g);
  }
  for (std::size_t i = 0; i < grad_params.size(); ++i) grad_params[i] += g.params[i];
  for (std::size_t t = 0; t < grad_rotation.size(); ++t)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) grad_rotation[t][i][j] += g.rotation[t][i][j];
}

}  // namespace reference

}  // namespace tilted
