// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Parallel kernels against their serial references, plus one ResNet-20
// training step as an end-to-end figure.

#include <benchmark/benchmark.h>

#include <numeric>

#include "banet/backbone.hpp"
#include "banet/init.hpp"
#include "banet/kernels.hpp"
#include "banet/ops.hpp"

namespace {

using banet::kernels::ConvGeometry;

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  banet::Rng rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Args: batch, in_ch, out_ch, spatial, kernel, stride
ConvGeometry geometry(const benchmark::State& state) {
  const auto k = state.range(4);
  return ConvGeometry::make(state.range(0), state.range(1), state.range(3), state.range(3), state.range(2), k,
                            state.range(5), k / 2);
}

void set_flops(benchmark::State& state, const ConvGeometry& g, double passes) {
  const double macs = static_cast<double>(g.batch * g.out_ch * g.positions() * g.patch());
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * macs * passes * static_cast<double>(state.iterations()), benchmark::Counter::kIsRate,
                         benchmark::Counter::kIs1000);
}

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = random_values(g.batch * g.in_ch * g.in_h * g.in_w, 1);
  const auto w = random_values(g.out_ch * g.patch(), 2);
  std::vector<float> y(g.batch * g.out_ch * g.positions());
  for (auto _ : state) {
    if constexpr (Reference) {
      banet::kernels::reference::conv2d_forward(g, x.data(), w.data(), y.data());
    } else {
      banet::kernels::conv2d_forward(g, x.data(), w.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  set_flops(state, g, 1);
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = random_values(g.batch * g.in_ch * g.in_h * g.in_w, 1);
  const auto w = random_values(g.out_ch * g.patch(), 2);
  const auto dy = random_values(g.batch * g.out_ch * g.positions(), 3);
  std::vector<float> dx(x.size()), dw(w.size());
  for (auto _ : state) {
    std::fill(dx.begin(), dx.end(), 0.0f);
    std::fill(dw.begin(), dw.end(), 0.0f);
    if constexpr (Reference) {
      banet::kernels::reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    } else {
      banet::kernels::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    }
    benchmark::DoNotOptimize(dx.data());
    benchmark::DoNotOptimize(dw.data());
  }
  set_flops(state, g, 2);
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const auto n = state.range(0);
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Reference) {
      banet::kernels::reference::gemm<float>(false, false, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    } else {
      banet::kernels::gemm<float>(false, false, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n * static_cast<double>(state.iterations()),
                                                 benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({16, 16, 16, 32, 3, 1})->Args({16, 32, 32, 16, 3, 1})->Args({16, 64, 64, 8, 3, 1})->Args(
      {16, 32, 64, 16, 3, 2});
  b->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForward<false>)->Apply(conv_shapes);
BENCHMARK(BM_ConvForward<true>)->Apply(conv_shapes);
BENCHMARK(BM_ConvBackward<false>)->Apply(conv_shapes);
BENCHMARK(BM_ConvBackward<true>)->Apply(conv_shapes);
BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const auto attention = static_cast<banet::AttentionKind>(state.range(0));
  auto net = banet::Network<float>::build(banet::resnet20(), attention, {}, 0);
  banet::Rng rng(0);
  const auto x = banet::normal<float>({64, 3, 32, 32}, 0.0, 1.0, rng);
  std::vector<int> labels(64);
  std::iota(labels.begin(), labels.end(), 0);
  for (auto& l : labels) l %= 10;
  for (auto _ : state) {
    const auto loss = banet::cross_entropy(net.forward(x, banet::Mode::train), labels);
    net.zero_grad();
    banet::backward(loss);
    banet::reset_tape<float>();
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
