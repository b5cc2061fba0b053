#include <benchmark/benchmark.h>

#include "hrsim/analysis.hpp"
#include "hrsim/iptw.hpp"
#include "hrsim/oracle.hpp"
#include "hrsim/sim_engine.hpp"

using namespace hrsim;

namespace {

Scenario bench_scenario(int n, std::uint64_t seed) {
  Scenario s = Scenario::paper_preset(0.9, 0.4, seed);
  s.n_subjects = n;
  return s;
}

void BM_GenerateCohort(benchmark::State& state) {
  const Scenario s = bench_scenario(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(generate_cohort(s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateCohort)->Arg(1000)->Arg(10000);

void BM_CoxCrude(benchmark::State& state) {
  const Cohort c = generate_cohort(bench_scenario(static_cast<int>(state.range(0)), 2));
  const CoxDesign d = make_design(c, false);
  for (auto _ : state) benchmark::DoNotOptimize(fit(d));
}
BENCHMARK(BM_CoxCrude)->Arg(1000)->Arg(10000);

void BM_CoxAdjusted(benchmark::State& state) {
  const Cohort c = generate_cohort(bench_scenario(static_cast<int>(state.range(0)), 3));
  const CoxDesign d = make_design(c, true);
  for (auto _ : state) benchmark::DoNotOptimize(fit(d));
}
BENCHMARK(BM_CoxAdjusted)->Arg(1000)->Arg(10000);

void BM_IptwHazardRatio(benchmark::State& state) {
  const Cohort c = generate_cohort(bench_scenario(static_cast<int>(state.range(0)), 4));
  for (auto _ : state) benchmark::DoNotOptimize(iptw_hazard_ratio(c));
}
BENCHMARK(BM_IptwHazardRatio)->Arg(1000)->Arg(10000);

void BM_ReplicationAnalysis(benchmark::State& state) {
  const Cohort c = generate_cohort(bench_scenario(static_cast<int>(state.range(0)), 5));
  for (auto _ : state) benchmark::DoNotOptimize(analyze_replication(c));
}
BENCHMARK(BM_ReplicationAnalysis)->Arg(10000);

void BM_PeriodGrid(benchmark::State& state) {
  const Cohort c = generate_cohort(bench_scenario(10000, 6));
  for (auto _ : state) benchmark::DoNotOptimize(period_specific_hr(c, 50.0, 400.0));
}
BENCHMARK(BM_PeriodGrid);

}  // namespace

BENCHMARK_MAIN();
