#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mot3d/assignment.hpp"
#include "mot3d/geometry.hpp"
#include "mot3d/tracker.hpp"

namespace {

using namespace mot3d;

std::vector<Box3D> random_boxes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-3, 3);
  std::uniform_real_distribution<double> ang(-3.14, 3.14);
  std::uniform_real_distribution<double> dim(1, 4);
  std::vector<Box3D> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({pos(rng), pos(rng), 0.0, ang(rng), dim(rng), dim(rng), 1.5});
  return out;
}

void BM_Iou3d(benchmark::State& state) {
  const auto a = random_boxes(256, 1);
  const auto b = random_boxes(256, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou_3d(a[i & 255], b[i & 255]));
    ++i;
  }
}
BENCHMARK(BM_Iou3d);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) cost(r, c) = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(4, 128)->Complexity(benchmark::oNCubed);

void BM_TrackerStep(benchmark::State& state) {
  const int objects = static_cast<int>(state.range(0));
  TrackerConfig cfg;
  std::vector<std::vector<Detection3D>> frames(200);
  for (int f = 0; f < 200; ++f) {
    for (int k = 0; k < objects; ++k) {
      Detection3D d;
      d.frame = f;
      d.class_label = "Car";
      d.box = Box3D{10.0 * k + 0.5 * f, 4.0 * (k % 3), 0.8, 0.0, 4.0, 1.8, 1.5};
      frames[static_cast<std::size_t>(f)].push_back(d);
    }
  }
  for (auto _ : state) {
    Tracker t(cfg);
    for (int f = 0; f < 200; ++f) benchmark::DoNotOptimize(t.step(f, frames[static_cast<std::size_t>(f)]));
  }
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_TrackerStep)->Arg(5)->Arg(20)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
