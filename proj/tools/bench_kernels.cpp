// Throughput comparison of the parallel grid kernels against their serial
// references, plus one full primal-dual frame step at the production size.

#include <benchmark/benchmark.h>

#include <cmath>

#include "popt/flow.hpp"
#include "popt/grid.hpp"
#include "popt/steprules.hpp"

namespace {

using namespace popt;

grid::Image test_image(int h, int w) {
  grid::Image img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) img.at(i, j) = 0.5 + 0.5 * std::sin(0.1 * i) * std::cos(0.07 * j);
  return img;
}

void bm_grad(benchmark::State& state) {
  const auto img = test_image(200, 300);
  for (auto _ : state) benchmark::DoNotOptimize(grid::grad(img));
}

void bm_grad_serial(benchmark::State& state) {
  const auto img = test_image(200, 300);
  for (auto _ : state) benchmark::DoNotOptimize(grid::serial::grad(img));
}

void bm_div(benchmark::State& state) {
  const auto f = grid::grad(test_image(200, 300));
  for (auto _ : state) benchmark::DoNotOptimize(grid::div(f));
}

void bm_div_serial(benchmark::State& state) {
  const auto f = grid::grad(test_image(200, 300));
  for (auto _ : state) benchmark::DoNotOptimize(grid::serial::div(f));
}

void bm_warp(benchmark::State& state) {
  const auto img = test_image(200, 300);
  const auto d = grid::Displacement::constant({0.37, -1.21});
  for (auto _ : state) benchmark::DoNotOptimize(grid::warp(img, d));
}

void bm_warp_serial(benchmark::State& state) {
  const auto img = test_image(200, 300);
  const auto d = grid::Displacement::constant({0.37, -1.21});
  for (auto _ : state) benchmark::DoNotOptimize(grid::serial::warp(img, d));
}

void bm_convolve(benchmark::State& state) {
  const auto img = test_image(200, 300);
  for (auto _ : state) benchmark::DoNotOptimize(grid::gaussian_convolve(img, 3.0, 11));
}

void bm_convolve_serial(benchmark::State& state) {
  const auto img = test_image(200, 300);
  for (auto _ : state) benchmark::DoNotOptimize(grid::serial::gaussian_convolve(img, 3.0, 11));
}

void bm_popd_frame(benchmark::State& state) {
  const auto cfg = steprules::constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  flow::KnownFlowProblem prob(cfg, 1.0, 200, 300);
  flow::FrameRecord rec;
  rec.clean = test_image(200, 300);
  rec.noisy = rec.clean;
  rec.shift_true = rec.shift_meas = {0.4, -0.6};
  for (auto _ : state) {
    auto out = prob.step(rec);
    benchmark::DoNotOptimize(out);
  }
}

}  // namespace

BENCHMARK(bm_grad);
BENCHMARK(bm_grad_serial);
BENCHMARK(bm_div);
BENCHMARK(bm_div_serial);
BENCHMARK(bm_warp);
BENCHMARK(bm_warp_serial);
BENCHMARK(bm_convolve);
BENCHMARK(bm_convolve_serial);
BENCHMARK(bm_popd_frame);

BENCHMARK_MAIN();
