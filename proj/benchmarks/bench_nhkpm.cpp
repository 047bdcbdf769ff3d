#include <benchmark/benchmark.h>

#include "nhkpm/nhkpm.hpp"

using namespace nhkpm;

namespace {

SparseOperator chain(int L) {
  SpinChainParams p;
  p.L = L;
  p.gamma = 0.1;
  p.hz = 2.0;
  return build_spin_chain(p);
}

void BM_SparseApply(benchmark::State& state) {
  const SparseOperator H = chain(static_cast<int>(state.range(0)));
  const StateVector v = StateVector::Random(H.dim());
  for (auto _ : state) benchmark::DoNotOptimize(H.apply(v));
  state.SetItemsProcessed(state.iterations() * H.nonzeros());
}
BENCHMARK(BM_SparseApply)->DenseRange(6, 12, 2);

// One omega, one (left, right) pair: the cost unit of every map.
void BM_RecursionPoint(benchmark::State& state) {
  const SparseOperator H = chain(static_cast<int>(state.range(0)));
  const int N = static_cast<int>(state.range(1));
  const KpmPlan plan = KpmPlan::make(N, estimate_scale_factor(H, 1.0));
  const NhkpmEngine engine(H, plan);
  const StateVector v = StateVector::Random(H.dim()).normalized();
  const std::vector<cplx> omega{{0.0, 0.23}};
  for (auto _ : state) benchmark::DoNotOptimize(engine.evaluate(v, v, omega));
  state.SetComplexityN(N);
}
BENCHMARK(BM_RecursionPoint)->ArgsProduct({{6, 8, 10}, {50, 100, 200}})->Unit(benchmark::kMillisecond);

// Block of columns at once versus the same columns one by one.
void BM_RecursionBlock(benchmark::State& state) {
  const SparseOperator H = chain(8);
  const KpmPlan plan = KpmPlan::make(100, estimate_scale_factor(H, 1.0));
  const NhkpmEngine engine(H, plan);
  const Index cols = state.range(0);
  const Eigen::MatrixXcd V = Eigen::MatrixXcd::Random(H.dim(), cols);
  const std::vector<cplx> omegas(static_cast<std::size_t>(cols), cplx{0.1, 0.2});
  for (auto _ : state) benchmark::DoNotOptimize(engine.evaluate_columns(V, V, omegas));
  state.SetItemsProcessed(state.iterations() * cols);
}
BENCHMARK(BM_RecursionBlock)->RangeMultiplier(2)->Range(1, 32)->Unit(benchmark::kMillisecond);

void BM_GroundState(benchmark::State& state) {
  const SparseOperator H = chain(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(smallest_real_eigpair(H));
}
BENCHMARK(BM_GroundState)->DenseRange(6, 10, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
