// Batched OpenMP query kernels against the serial reference loop.

#include <benchmark/benchmark.h>

#include <vector>

#include "tilted/grid_kernels.hpp"
#include "tilted/rng.hpp"

using namespace tilted;

namespace {

constexpr int kBatch = 4096;

struct Setup {
  FactoredVolume volume;
  std::vector<double> points;
  std::vector<double> latent;
  std::vector<double> grad_latent;
  std::vector<double> grad_params;
  std::vector<Mat3> grad_rotation;
};

Setup make(DecompositionKind kind) {
  const auto spec = DecompositionSpec::make(kind, 16, 64, {1.0}, kind == DecompositionKind::CP2D ? 8 : 4);
  Setup s{FactoredVolume(spec, TransformSet::random(spec.input_dim(), spec.transforms, 1)), {}, {}, {}, {}, {}};
  s.volume.randomize(2, 1.0);
  Rng rng(3);
  s.points.resize(static_cast<std::size_t>(kBatch) * spec.input_dim());
  for (auto& x : s.points) x = rng.uniform(-1, 1);
  s.latent.resize(static_cast<std::size_t>(kBatch) * spec.latent_dim());
  s.grad_latent.resize(s.latent.size());
  for (auto& x : s.grad_latent) x = rng.normal();
  s.grad_params.resize(s.volume.parameter_count());
  s.grad_rotation.resize(spec.transforms);
  return s;
}

DecompositionKind kind_of(int i) {
  return i == 0 ? DecompositionKind::CP2D : i == 1 ? DecompositionKind::KPlanes : DecompositionKind::VectorMatrix;
}

void BM_QueryBatched(benchmark::State& st) {
  Setup s = make(kind_of(static_cast<int>(st.range(0))));
  for (auto _ : st) {
    query_batch(s.volume, s.points, s.latent, nullptr, 0);
    benchmark::DoNotOptimize(s.latent.data());
  }
  st.SetItemsProcessed(st.iterations() * kBatch);
}

void BM_QueryReference(benchmark::State& st) {
  Setup s = make(kind_of(static_cast<int>(st.range(0))));
  for (auto _ : st) {
    reference::query_batch(s.volume, s.points, s.latent);
    benchmark::DoNotOptimize(s.latent.data());
  }
  st.SetItemsProcessed(st.iterations() * kBatch);
}

void BM_BackwardBatched(benchmark::State& st) {
  Setup s = make(kind_of(static_cast<int>(st.range(0))));
  QueryCache cache;
  query_batch(s.volume, s.points, s.latent, &cache, 0);
  for (auto _ : st) {
    query_batch_vjp(s.volume, s.points, cache, s.grad_latent, s.grad_params, s.grad_rotation, 0);
    benchmark::DoNotOptimize(s.grad_params.data());
  }
  st.SetItemsProcessed(st.iterations() * kBatch);
}

void BM_BackwardReference(benchmark::State& st) {
  Setup s = make(kind_of(static_cast<int>(st.range(0))));
  for (auto _ : st) {
    reference::query_batch_vjp(s.volume, s.points, s.grad_latent, s.grad_params, s.grad_rotation);
    benchmark::DoNotOptimize(s.grad_params.data());
  }
  st.SetItemsProcessed(st.iterations() * kBatch);
}

}  // namespace

// 0 = CP2D, 1 = K-Planes, 2 = VM
BENCHMARK(BM_QueryBatched)->DenseRange(0, 2);
BENCHMARK(BM_QueryReference)->DenseRange(0, 2);
BENCHMARK(BM_BackwardBatched)->DenseRange(0, 2);
BENCHMARK(BM_BackwardReference)->DenseRange(0, 2);

BENCHMARK_MAIN();
