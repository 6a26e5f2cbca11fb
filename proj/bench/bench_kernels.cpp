// Serial vs OpenMP kernel comparison. Matrix sizes bracket what the models
// actually run: attention-score blocks, MLP panels, classifier heads.

#include <benchmark/benchmark.h>

#include <vector>

#include "pldlab/kernels.hpp"
#include "pldlab/rng.hpp"

using namespace pldlab;
using namespace pldlab::kernels;

namespace {

std::vector<float> random_matrix(std::int64_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

void bench_gemm_nn_serial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_matrix(std::int64_t(n) * n, 1);
  auto b = random_matrix(std::int64_t(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    gemm_nn_serial(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * std::int64_t(n) * n * n);
}

void bench_gemm_nn_parallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_matrix(std::int64_t(n) * n, 1);
  auto b = random_matrix(std::int64_t(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    gemm_nn(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * std::int64_t(n) * n * n);
}

void bench_gemm_nt_serial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_matrix(std::int64_t(n) * n, 1);
  auto b = random_matrix(std::int64_t(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    gemm_nt_serial(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * std::int64_t(n) * n * n);
}

void bench_gemm_nt_parallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_matrix(std::int64_t(n) * n, 1);
  auto b = random_matrix(std::int64_t(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    gemm_nt(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * std::int64_t(n) * n * n);
}

void bench_gemm_tn_serial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_matrix(std::int64_t(n) * n, 1);
  auto b = random_matrix(std::int64_t(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    gemm_tn_serial(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * std::int64_t(n) * n * n);
}

void bench_gemm_tn_parallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_matrix(std::int64_t(n) * n, 1);
  auto b = random_matrix(std::int64_t(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    gemm_tn(a.data(), b.data(), c.data(), n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * std::int64_t(n) * n * n);
}

void bench_softmax_serial(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const int cols = 512;
  auto x = random_matrix(std::int64_t(rows) * cols, 3);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    softmax_rows_serial(x.data(), y.data(), rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(rows) * cols);
}

void bench_softmax_parallel(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const int cols = 512;
  auto x = random_matrix(std::int64_t(rows) * cols, 3);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    softmax_rows(x.data(), y.data(), rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(rows) * cols);
}

}  // namespace

BENCHMARK(bench_gemm_nn_serial)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bench_gemm_nn_parallel)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bench_gemm_nt_serial)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bench_gemm_nt_parallel)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bench_gemm_tn_serial)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bench_gemm_tn_parallel)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bench_softmax_serial)->Arg(64)->Arg(1024)->Arg(8192);
BENCHMARK(bench_softmax_parallel)->Arg(64)->Arg(1024)->Arg(8192);

BENCHMARK_MAIN();
