// Microbenchmarks for the numeric hot spots: matrix kernels, convolution,
// attention, the edge-model fitter, disk rendering and SSIM.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "cvsdeblur/disk.hpp"
#include "cvsdeblur/frame.hpp"
#include "cvsdeblur/gemm.hpp"
#include "cvsdeblur/metrics.hpp"
#include "cvsdeblur/ops.hpp"
#include "cvsdeblur/tensor.hpp"

using namespace cvsdeblur;

namespace {

std::vector<float> random_vec(std::int64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

void bm_gemm_nn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_vec(static_cast<std::int64_t>(n) * n, 1);
  auto b = random_vec(static_cast<std::int64_t>(n) * n, 2);
  std::vector<float> c(static_cast<size_t>(n) * n);
  for (auto _ : state) {
    nn::gemm_nn(n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

void bm_gemm_nt(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_vec(static_cast<std::int64_t>(n) * n, 3);
  auto b = random_vec(static_cast<std::int64_t>(n) * n, 4);
  std::vector<float> c(static_cast<size_t>(n) * n);
  for (auto _ : state) {
    nn::gemm_nt(n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

void bm_gemm_tn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_vec(static_cast<std::int64_t>(n) * n, 5);
  auto b = random_vec(static_cast<std::int64_t>(n) * n, 6);
  std::vector<float> c(static_cast<size_t>(n) * n);
  for (auto _ : state) {
    nn::gemm_tn(n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

// 3x3 same-padding convolution at restoration-network scale.
void bm_conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  auto x = nn::TensorT<float>::from_vector({1, c, hw, hw}, random_vec(static_cast<std::int64_t>(c) * hw * hw, 7));
  auto w = nn::TensorT<float>::from_vector({c, c, 3, 3}, random_vec(static_cast<std::int64_t>(c) * c * 9, 8));
  auto b = nn::TensorT<float>::zeros({c});
  for (auto _ : state) {
    auto y = nn::conv2d(x, w, b);
    benchmark::DoNotOptimize(y.value().data());
  }
}

// Scaled dot-product attention at the token counts the fusion stage sees.
void bm_attention(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  auto q = nn::TensorT<float>::from_vector({1, len, d}, random_vec(static_cast<std::int64_t>(len) * d, 9));
  auto k = nn::TensorT<float>::from_vector({1, len, d}, random_vec(static_cast<std::int64_t>(len) * d, 10));
  auto v = nn::TensorT<float>::from_vector({1, len, d}, random_vec(static_cast<std::int64_t>(len) * d, 11));
  for (auto _ : state) {
    auto y = nn::attention(q, k, v);
    benchmark::DoNotOptimize(y.value().data());
  }
}

// Gauss-Newton logistic fit on a clean rising edge segment.
void bm_fit_sigmoid(benchmark::State& state) {
  std::vector<metrics::ProfilePoint> seg;
  for (int i = 0; i < 60; ++i) {
    const double t = -0.5 + i / 59.0;
    seg.push_back({t, 0.2 + 0.6 / (1.0 + std::exp(-(8.0 * t + 0.3)))});
  }
  for (auto _ : state) {
    auto fit = metrics::fit_sigmoid(seg);
    benchmark::DoNotOptimize(fit);
  }
}

void bm_disk_render(benchmark::State& state) {
  DiskSpec spec;
  spec.size = static_cast<int>(state.range(0));
  spec.rpm = 300.0;
  spec.n_frames = 5;
  for (auto _ : state) {
    auto frames = render_disk_frames(spec);
    benchmark::DoNotOptimize(frames.data());
  }
}

void bm_ssim(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  Frame a(hw, hw, 3), b(hw, hw, 3);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : a.data) v = u(rng);
  for (size_t i = 0; i < b.data.size(); ++i) b.data[i] = 0.9f * a.data[i] + 0.05f;
  for (auto _ : state) {
    double s = metrics::ssim(a, b);
    benchmark::DoNotOptimize(s);
  }
}

BENCHMARK(bm_gemm_nn)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_gemm_nt)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_gemm_tn)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_conv2d)->Args({8, 48})->Args({16, 48})->Args({16, 96});
BENCHMARK(bm_attention)->Args({576, 8})->Args({2304, 4})->Args({2304, 8});
BENCHMARK(bm_fit_sigmoid);
BENCHMARK(bm_disk_render)->Arg(128)->Arg(256);
BENCHMARK(bm_ssim)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
