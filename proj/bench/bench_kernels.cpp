// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP GEMM at the shapes the model hits plus a few
// larger ones where threading pays off.

#include <cstddef>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tagmoe/kernels.hpp"

namespace {

using Gemm = void (*)(std::size_t, std::size_t, std::size_t, std::span<const double>, std::span<const double>,
                      std::span<double>, bool);

std::vector<double> random_matrix(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void run(benchmark::State& state, Gemm gemm) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  const auto a = random_matrix(m * k, 1);
  const auto b = random_matrix(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    gemm(m, n, k, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * n * k));
  state.counters["threads"] = tagmoe::kernels::max_threads();
}

void serial_nn(benchmark::State& s) { run(s, tagmoe::kernels::serial::gemm_nn); }
void parallel_nn(benchmark::State& s) { run(s, tagmoe::kernels::parallel::gemm_nn); }
void serial_nt(benchmark::State& s) { run(s, tagmoe::kernels::serial::gemm_nt); }
void parallel_nt(benchmark::State& s) { run(s, tagmoe::kernels::parallel::gemm_nt); }
void serial_tn(benchmark::State& s) { run(s, tagmoe::kernels::serial::gemm_tn); }
void parallel_tn(benchmark::State& s) { run(s, tagmoe::kernels::parallel::gemm_tn); }

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({14, 64, 32})->Args({14, 32, 64})->Args({128, 128, 128})->Args({256, 256, 256});
}

}  // namespace

BENCHMARK(serial_nn)->Apply(shapes);
BENCHMARK(parallel_nn)->Apply(shapes);
BENCHMARK(serial_nt)->Apply(shapes);
BENCHMARK(parallel_nt)->Apply(shapes);
BENCHMARK(serial_tn)->Apply(shapes);
BENCHMARK(parallel_tn)->Apply(shapes);

BENCHMARK_MAIN();
