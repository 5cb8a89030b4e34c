#include <benchmark/benchmark.h>

#include "conformal_lab/beltrami.hpp"
#include "conformal_lab/boundary.hpp"
#include "conformal_lab/distortion.hpp"
#include "conformal_lab/level_curve.hpp"
#include "conformal_lab/minimizer.hpp"
#include "conformal_lab/oracles.hpp"

using namespace conformal_lab;

static void BM_BuildMesh(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_disk_mesh(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_BuildMesh)->DenseRange(3, 6);

static void BM_Wirtinger(benchmark::State& state) {
  const DiskMesh mesh = build_disk_mesh(static_cast<int>(state.range(0)));
  const DiscreteMap map = harmonic_extension_fem(mesh, parse_boundary("sine:eps=0.3,m=2"));
  for (auto _ : state) benchmark::DoNotOptimize(wirtinger(mesh, map));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(mesh.num_triangles()));
}
BENCHMARK(BM_Wirtinger)->DenseRange(4, 6);

static void BM_EnergyGradient(benchmark::State& state) {
  const DiskMesh mesh = build_disk_mesh(static_cast<int>(state.range(0)));
  const DiscreteMap map = harmonic_extension_fem(mesh, parse_boundary("sine:eps=0.3,m=2"));
  const EnergyProfile a = power_profile(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(energy_gradient(mesh, map, a));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(mesh.num_triangles()));
}
BENCHMARK(BM_EnergyGradient)->DenseRange(4, 6);

static void BM_Minimize(benchmark::State& state) {
  const DiskMesh mesh = build_disk_mesh(static_cast<int>(state.range(0)));
  const CircleHomeo h0 = parse_boundary("sine:eps=0.3,m=2");
  MinimizeConfig cfg;
  cfg.profile = power_profile(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(minimize(mesh, h0, cfg));
}
BENCHMARK(BM_Minimize)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

static void BM_LevelSolve(benchmark::State& state) {
  const std::vector<double> xs = geometric_grid(level_x_for_V(2.0, 10.0, 0.999), 300.0, 1024);
  for (auto _ : state) {
    for (double x : xs) benchmark::DoNotOptimize(level_solve(2.0, 10.0, x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(xs.size()));
}
BENCHMARK(BM_LevelSolve);

static void BM_EllipticitySample(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(ellipticity_sample(2.0, 10000, 42, 100));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_EllipticitySample)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
