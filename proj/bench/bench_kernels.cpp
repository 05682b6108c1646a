// Serial reference against the OpenMP kernels, plus end-to-end search paths.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "ebr/ivf.hpp"
#include "ebr/kernels.hpp"
#include "ebr/retrieval.hpp"
#include "ebr/vector_core.hpp"

namespace {

constexpr std::size_t kDim = ebr::kDefaultDim;

std::vector<float> random_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  std::vector<float> v(n * kDim);
  for (std::size_t r = 0; r < n; ++r) {
    double norm = 0;
    for (std::size_t i = 0; i < kDim; ++i) {
      v[r * kDim + i] = g(rng);
      norm += double(v[r * kDim + i]) * v[r * kDim + i];
    }
    for (std::size_t i = 0; i < kDim; ++i) v[r * kDim + i] = float(v[r * kDim + i] / std::sqrt(norm));
  }
  return v;
}

template <auto Kernel>
void BM_dot_rows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto rows = random_rows(n, 1);
  const auto q = random_rows(1, 2);
  std::vector<double> out(n);
  for (auto _ : state) {
    Kernel(q, rows, kDim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <auto Kernel>
void BM_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto rows = random_rows(n, 3);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(rows, kDim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n / 2));
}

template <auto Kernel>
void BM_assign(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto rows = random_rows(n, 4);
  const auto cent = random_rows(256, 5);
  std::vector<std::uint32_t> a(n);
  std::vector<double> best(n);
  for (auto _ : state) {
    Kernel(rows, cent, kDim, a, best);
    benchmark::DoNotOptimize(a.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

ebr::VectorStore store_of(std::size_t n) {
  const auto rows = random_rows(n, 6);
  ebr::VectorStore s(kDim);
  for (std::size_t r = 0; r < n; ++r) {
    s.insert("v" + std::to_string(r),
             ebr::EmbeddingVector::from_unit(std::vector<float>(rows.begin() + r * kDim, rows.begin() + (r + 1) * kDim)));
  }
  return s;
}

void BM_exact_top_k(benchmark::State& state) {
  const auto store = store_of(static_cast<std::size_t>(state.range(0)));
  const auto q = store.vector("v0");
  for (auto _ : state) benchmark::DoNotOptimize(ebr::top_k_exact(q, store, 200));
}

void BM_ivf_top_k(benchmark::State& state) {
  const auto store = store_of(static_cast<std::size_t>(state.range(0)));
  const auto index = ebr::build_ivf(store, ebr::default_n_partitions(store.size()));
  const auto q = store.vector("v0");
  for (auto _ : state) benchmark::DoNotOptimize(ebr::search_ivf(index, q, 200, index.default_n_probe()));
}

}  // namespace

BENCHMARK(BM_dot_rows<ebr::kernels::serial::dot_rows>)->Name("dot_rows/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_dot_rows<ebr::kernels::omp::dot_rows>)->Name("dot_rows/omp")->Arg(10000)->Arg(100000);
BENCHMARK(BM_gram<ebr::kernels::serial::gram>)->Name("gram/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_gram<ebr::kernels::omp::gram>)->Name("gram/omp")->Arg(500)->Arg(2000);
BENCHMARK(BM_assign<ebr::kernels::serial::assign_nearest>)->Name("assign_nearest/serial")->Arg(20000);
BENCHMARK(BM_assign<ebr::kernels::omp::assign_nearest>)->Name("assign_nearest/omp")->Arg(20000);
BENCHMARK(BM_exact_top_k)->Arg(50000);
BENCHMARK(BM_ivf_top_k)->Arg(50000);

BENCHMARK_MAIN();
