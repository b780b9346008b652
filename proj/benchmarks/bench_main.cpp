#include <shapetest/bootstrap.hpp>
#include <shapetest/simharness.hpp>

#include <benchmark/benchmark.h>

using namespace shapetest;

namespace {

std::pair<std::vector<double>, std::vector<double>> draw(int n) {
  ScenarioConfig cfg;
  cfg.n = n;
  return generate(cfg, 0);
}

}  // namespace

static void BM_DesignMatrix(benchmark::State& state) {
  const KnotSystem ks = make_knot_system(3, 6);
  const auto [x, y] = draw(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(design_matrix(ks, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DesignMatrix)->Arg(1000)->Arg(10000);

static void BM_PlanBuild(benchmark::State& state) {
  const SplineBasis basis(make_knot_system(3, 6));
  const auto [x, y] = draw(static_cast<int>(state.range(0)));
  const OrderedSample os = order_and_trim(x, y, basis);
  for (auto _ : state) benchmark::DoNotOptimize(RecursiveResidualPlan(os.P_sorted, os.tail_start));
}
BENCHMARK(BM_PlanBuild)->Arg(1000)->Arg(10000);

static void BM_PlanResiduals(benchmark::State& state) {
  const SplineBasis basis(make_knot_system(3, 6));
  const auto [x, y] = draw(static_cast<int>(state.range(0)));
  const OrderedSample os = order_and_trim(x, y, basis);
  const RecursiveResidualPlan plan(os.P_sorted, os.tail_start);
  for (auto _ : state) benchmark::DoNotOptimize(plan.residuals(os.y_sorted));
}
BENCHMARK(BM_PlanResiduals)->Arg(1000)->Arg(10000);

static void BM_PseudoInverseSweep(benchmark::State& state) {
  const SplineBasis basis(make_knot_system(3, 6));
  const auto [x, y] = draw(static_cast<int>(state.range(0)));
  const OrderedSample os = order_and_trim(x, y, basis);
  const PseudoInverseSweep sweep(os.P_sorted, os.tail_start);
  for (auto _ : state) benchmark::DoNotOptimize(sweep.residuals(os.y_sorted));
}
BENCHMARK(BM_PseudoInverseSweep)->Arg(1000);

static void BM_BootstrapReplicate(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  const auto [x, y] = generate(cfg, 0);
  const Hypothesis h = scenario_hypothesis(cfg);
  const BootstrapEngine engine(x, y, h.basis, h.primary());
  std::uint64_t b = 0;
  for (auto _ : state) benchmark::DoNotOptimize(engine.replicate(1, b++));
}
BENCHMARK(BM_BootstrapReplicate)->Arg(1000);

static void BM_LogConvexTransform(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.scenario = 5;
  cfg.n = 1000;
  const auto [x, y] = generate(cfg, 0);
  const Hypothesis h = scenario_hypothesis(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(shapetest::transform(x, y, h.basis, h.primary()));
}
BENCHMARK(BM_LogConvexTransform);
BENCHMARK_MAIN();
