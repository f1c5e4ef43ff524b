#include <benchmark/benchmark.h>

#include <cmath>

#include "spl/boxlabel.hpp"
#include "spl/pointlabel.hpp"
#include "spl/signals.hpp"

using namespace spl;

namespace {

std::vector<geom::Vec3> random_points(std::size_t n, Rng& rng) {
  std::vector<geom::Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(0, 20), rng.uniform(-10, 10), rng.uniform(-1.5, 1.0)};
  return pts;
}

// Car-sized L outline with range noise.
std::vector<geom::Vec3> car_outline(std::size_t n, Rng& rng) {
  std::vector<geom::Vec3> pts;
  const double c = std::cos(0.4), s = std::sin(0.4);
  for (std::size_t i = 0; i < n; ++i) {
    const bool side = i % 2 == 0;
    const double u = side ? rng.uniform(-2.25, 2.25) : -2.25, v = side ? -0.9 : rng.uniform(-0.9, 0.9);
    pts.push_back({12 + c * u - s * v + rng.normal(0, 0.02), 3 + s * u + c * v + rng.normal(0, 0.02), rng.uniform(0, 1.5)});
  }
  return pts;
}

void BM_Dbscan(benchmark::State& state) {
  Rng rng(1);
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(pointlabel::dbscan(pts, 0.5, 4));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dbscan)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_IouBev(benchmark::State& state) {
  Rng rng(2);
  std::vector<geom::Box3D> boxes(64);
  for (auto& b : boxes) b = {rng.uniform(-2, 2), rng.uniform(-2, 2), 0, rng.uniform(1, 5), rng.uniform(1, 2), 1.5, rng.uniform(-3, 3)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geom::iou_bev(boxes[i % 64], boxes[(i * 7 + 3) % 64]));
    ++i;
  }
}
BENCHMARK(BM_IouBev);

void BM_Iou3d(benchmark::State& state) {
  Rng rng(3);
  std::vector<geom::Box3D> boxes(64);
  for (auto& b : boxes) {
    b = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 1), rng.uniform(1, 5), rng.uniform(1, 2), 1.5, rng.uniform(-3, 3)};
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geom::iou_3d(boxes[i % 64], boxes[(i * 7 + 3) % 64]));
    ++i;
  }
}
BENCHMARK(BM_Iou3d);

void BM_LShape(benchmark::State& state) {
  Rng rng(4);
  const auto pts = car_outline(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(boxlabel::fit_lshape(pts));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LShape)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_SimilarityMap(benchmark::State& state) {
  Rng rng(5);
  const int side = static_cast<int>(state.range(0));
  FeatureMap fm(side, side, 64);
  for (auto& v : fm.values) v = rng.normal();
  for (std::size_t c = 0; c < fm.cells(); ++c) normalize_in_place(fm.cell(c));
  const auto bank = PrototypeBank::random(kNumClasses, 5, 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(signals::similarity_map(fm, bank));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fm.cells()));
}
BENCHMARK(BM_SimilarityMap)->Arg(50)->Arg(100)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
