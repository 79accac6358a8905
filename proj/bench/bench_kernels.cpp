// Serial reference vs OpenMP kernels, plus per-step cost of each method.
//   ./bench_kernels --benchmark_filter=Gram

#include <benchmark/benchmark.h>

#include "ldc/kernels.hpp"
#include "ldc/solvers.hpp"
#include "ldc/task_suites.hpp"

using namespace ldc;

namespace {

Matrix random_grads(long k, long d) { return Matrix::Random(k, d); }

void BM_CombineSerial(benchmark::State& st) {
  const Matrix g = random_grads(st.range(0), st.range(1));
  const Vector c = Vector::Random(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::combine_rows_serial(g, c));
  st.SetItemsProcessed(st.iterations() * g.size());
}

void BM_CombineOmp(benchmark::State& st) {
  const Matrix g = random_grads(st.range(0), st.range(1));
  const Vector c = Vector::Random(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::combine_rows(g, c));
  st.SetItemsProcessed(st.iterations() * g.size());
}

void BM_GramSerial(benchmark::State& st) {
  const Matrix g = random_grads(st.range(0), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram_serial(g));
  st.SetItemsProcessed(st.iterations() * g.size() * st.range(0));
}

void BM_GramOmp(benchmark::State& st) {
  const Matrix g = random_grads(st.range(0), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram(g));
  st.SetItemsProcessed(st.iterations() * g.size() * st.range(0));
}

void kernel_sizes(benchmark::internal::Benchmark* b) {
  for (long k : {2, 11, 40})
    for (long d : {64, 4096, 65536}) b->Args({k, d});
}

// one optimizer step on a d = 64 quad suite; range(0) = K, range(1) = method
void BM_Step(benchmark::State& st) {
  const int k = static_cast<int>(st.range(0));
  auto q = random_quad_suite(k, 64, 17 + k);
  RunConfig c;
  c.method = static_cast<Method>(st.range(1));
  c.bilevel.alpha = 1e-3;
  c.correction = CorrectionMode::exact;
  if (c.method == Method::ls) c.ls_weights = SimplexWeights::uniform(k);
  TrainState s = initial_state(c, *q);
  for (auto _ : st) benchmark::DoNotOptimize(step_once(s, *q, c));
  st.SetLabel(to_string(c.method));
}

void step_grid(benchmark::internal::Benchmark* b) {
  for (Method m : {Method::ldc_single, Method::ldc_double, Method::ls, Method::mgda})
    for (long k : {2, 11, 40}) b->Args({k, static_cast<long>(m)});
}

}  // namespace

BENCHMARK(BM_CombineSerial)->Apply(kernel_sizes);
BENCHMARK(BM_CombineOmp)->Apply(kernel_sizes);
BENCHMARK(BM_GramSerial)->Apply(kernel_sizes);
BENCHMARK(BM_GramOmp)->Apply(kernel_sizes);
BENCHMARK(BM_Step)->Apply(step_grid);

BENCHMARK_MAIN();
