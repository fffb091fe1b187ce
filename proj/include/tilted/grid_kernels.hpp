#pragma once

// Batched factored-volume queries. The OpenMP kernels parallelize the
// forward pass over samples and the backward pass over factor slots; every
// parameter gradient entry is accumulated by exactly one task in sample
// order, so results are independent of the thread count. The serial
// reference implementations loop over samples calling query / query_vjp and
// are kept for testing and benchmarking.

#include <span>
#include <vector>

#include "tilted/grids.hpp"

namespace tilted {

// Factor latents saved by the forward pass for reuse in the backward pass:
// [sample][slot][channel].
struct QueryCache {
  std::vector<double> latents;
  std::size_t batch = 0;
};

// points: batch * input_dim, latent_out: batch * latent_dim.
// threads <= 0 uses the OpenMP default.
void query_batch(const FactoredVolume& volume, std::span<const double> points,
                 std::span<double> latent_out, QueryCache* cache = nullptr, int threads = 0);

// Accumulates parameter gradients into grad_params and dL/dR_t into
// grad_rotation. Requires the cache filled by query_batch on the same points.
void query_batch_vjp(const FactoredVolume& volume, std::span<const double> points,
                     const QueryCache& cache, std::span<const double> grad_latent,
                     std::span<double> grad_params, std::span<Mat3> grad_rotation, int threads = 0);

namespace reference {

void query_batch(const FactoredVolume& volume, std::span<const double> points,
                 std::span<double> latent_out);

void query_batch_vjp(const FactoredVolume& volume, std::span<const double> points,
                     std::span<const double> grad_latent, std::span<double> grad_params,
                     std::span<Mat3> grad_rotation);

}  // namespace reference

}  // namespace tilted
