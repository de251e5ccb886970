#include <cstddef>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "kda/kernels.hpp"

namespace {

std::vector<double> random_buffer(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

// Shapes mirror training: features d x n, landmarks d x m.
void BM_GemmTN_Serial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 128, m = 64;
    const auto x = random_buffer(d * n, 1), l = random_buffer(d * m, 2);
    std::vector<double> c(n * m);
    for (auto _ : state) {
        kda::kernels::serial::gemm_tn(x, l, c, n, d, m);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * m * d));
}

void BM_GemmTN_Omp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto threads = static_cast<int>(state.range(1));
    const std::size_t d = 128, m = 64;
    const auto x = random_buffer(d * n, 1), l = random_buffer(d * m, 2);
    std::vector<double> c(n * m);
    for (auto _ : state) {
        kda::kernels::omp::gemm_tn(x, l, c, n, d, m, threads);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * m * d));
}

void BM_GemmNN_Serial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_buffer(n * n, 3), b = random_buffer(n * n, 4);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        kda::kernels::serial::gemm_nn(a, b, c, n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
}

void BM_GemmNN_Omp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto threads = static_cast<int>(state.range(1));
    const auto a = random_buffer(n * n, 3), b = random_buffer(n * n, 4);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        kda::kernels::omp::gemm_nn(a, b, c, n, n, n, threads);
        benchmark::DoNotOptimize(c.data());
    }
}

void BM_Gram_Serial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 32;
    const auto x = random_buffer(d * n, 5);
    std::vector<double> g(n * n);
    for (auto _ : state) {
        kda::kernels::serial::gram(x, g, d, n);
        benchmark::DoNotOptimize(g.data());
    }
}

void BM_Gram_Omp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto threads = static_cast<int>(state.range(1));
    const std::size_t d = 32;
    const auto x = random_buffer(d * n, 5);
    std::vector<double> g(n * n);
    for (auto _ : state) {
        kda::kernels::omp::gram(x, g, d, n, threads);
        benchmark::DoNotOptimize(g.data());
    }
}

}  // namespace

BENCHMARK(BM_GemmTN_Serial)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_GemmTN_Omp)->ArgsProduct({{256, 1024, 4096}, {1, 2, 4}})->UseRealTime();
BENCHMARK(BM_GemmNN_Serial)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNN_Omp)->ArgsProduct({{64, 256}, {1, 2, 4}})->UseRealTime();
BENCHMARK(BM_Gram_Serial)->Arg(256)->Arg(1024);
BENCHMARK(BM_Gram_Omp)->ArgsProduct({{256, 1024}, {1, 2, 4}})->UseRealTime();

BENCHMARK_MAIN();
