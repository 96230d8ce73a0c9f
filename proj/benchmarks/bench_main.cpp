#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "detbench/augment.hpp"
#include "detbench/blocks.hpp"
#include "detbench/geometry.hpp"
#include "detbench/metrics.hpp"
#include "detbench/tensor.hpp"

namespace {

std::vector<detbench::BoundingBox> random_boxes(int n, int classes, bool with_conf,
                                                std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> pos(0.0, 600.0), len(4.0, 60.0), conf(0.01, 0.99);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::vector<detbench::BoundingBox> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    detbench::BoundingBox b;
    b.x_min = pos(gen);
    b.y_min = pos(gen);
    b.x_max = b.x_min + len(gen);
    b.y_max = b.y_min + len(gen);
    b.class_id = cls(gen);
    if (with_conf) b.confidence = conf(gen);
    out.push_back(b);
  }
  return out;
}

std::vector<double> grid10() {
  std::vector<double> g;
  for (int i = 0; i < 10; ++i) g.push_back(0.50 + 0.05 * i);
  return g;
}

void BM_Iou(benchmark::State& state) {
  const auto boxes = random_boxes(256, 5, false, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = boxes[i % boxes.size()];
    const auto& b = boxes[(i * 7 + 3) % boxes.size()];
    benchmark::DoNotOptimize(detbench::iou(a, b));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_Matching(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto gts = random_boxes(n, 5, false, 2);
  const auto preds = random_boxes(n, 5, true, 3);
  const auto grid = grid10();
  for (auto _ : state) {
    benchmark::DoNotOptimize(detbench::match_predictions(gts, preds, grid));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Matching)->Range(64, 2048)->Complexity();

void BM_AveragePrecision(benchmark::State& state) {
  const auto gts = random_boxes(400, 5, false, 4);
  const auto preds = random_boxes(1000, 5, true, 5);
  const auto grid = grid10();
  const auto match = detbench::match_predictions(gts, preds, grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(detbench::average_precision(match, 0, grid[0]));
  }
}
BENCHMARK(BM_AveragePrecision);

void BM_SweepCurves(benchmark::State& state) {
  const auto gts = random_boxes(400, 5, false, 6);
  const auto preds = random_boxes(1000, 5, true, 7);
  const auto grid = grid10();
  const auto match = detbench::match_predictions(gts, preds, grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(detbench::sweep_curves(match, grid[0], 1000));
  }
}
BENCHMARK(BM_SweepCurves);

void BM_Conv2d(benchmark::State& state) {
  detbench::Tensor4 x(1, 16, 64, 64);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : x.data) v = u(gen);
  const auto spec = detbench::ConvSpec::seeded(16, 32, 3, 1, 1, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(detbench::conv2d(x, spec));
  }
}
BENCHMARK(BM_Conv2d);

void BM_WarpImage(benchmark::State& state) {
  detbench::Image img(320, 320);
  std::mt19937_64 gen(10);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(d(gen));
  const detbench::Mat3 fwd = detbench::affine_matrix(15.0, 0.05, -0.03, 1.1, 4.0, -2.0, 320, 320);
  for (auto _ : state) {
    benchmark::DoNotOptimize(detbench::warp_image(img, fwd));
  }
}
BENCHMARK(BM_WarpImage);

}  // namespace

BENCHMARK_MAIN();
