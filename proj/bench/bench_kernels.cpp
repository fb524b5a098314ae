#include "rsb/rsb_tree.hpp"
#include "rsb/wiener_rsb.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace rsb;

namespace {

HierarchicalMeasure bench_tree(std::size_t depth) {
  std::mt19937_64 g(1);
  return HierarchicalMeasure::random(depth, 2, 0.9, g);
}

// arg 0: serial, 1: parallel
void BM_NestedExpectation(benchmark::State& state) {
  WienerFunctional f;
  f.copies = 2;
  f.grid = {0.0, 0.5, 1.0};
  f.eval = [](std::size_t, std::span<const double> z, std::span<double> out) {
    double s = 0;
    for (double v : z) s += 0.3 * v;
    out[0] = std::tanh(s);
  };
  auto mu = DiscreteParisiMeasure::from_grid(std::vector<double>{0, 0.4, 0.8, 1}, std::vector<double>{0, 0.3, 0.7, 1});
  NestedPlan plan{2000, {8}};
  plan.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(nested_expectation(f, mu, plan, RngStream(3)).phi0.data());
  state.SetItemsProcessed(state.iterations() * plan.outer);
}
BENCHMARK(BM_NestedExpectation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KrsbExact(benchmark::State& state) {
  const auto tree = bench_tree(3);
  RsbExponents x({0.0, 0.3, 0.7, 1.0});
  ModelParams p{1.2, 2};
  for (auto _ : state) benchmark::DoNotOptimize(krsb_functional(tree, x, p, 0, Evaluator::exact, RngStream(1)).value);
}
BENCHMARK(BM_KrsbExact)->Unit(benchmark::kMillisecond);

void BM_PhiHatExact(benchmark::State& state) {
  const auto tree = bench_tree(2);
  RsbExponents x({0.0, 0.5, 1.0});
  auto psi = [](std::span<const double> m) {
    double s = 0;
    for (double v : m) s += v;
    return std::log(std::cosh(s));
  };
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(phi_hat_exact(psi, tree, x, 6, parallel));
}
BENCHMARK(BM_PhiHatExact)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
