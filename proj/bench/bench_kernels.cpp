// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "bellsim/montecarlo.hpp"
#include "bellsim/scenarios.hpp"
#include "bellsim/streams.hpp"

namespace {

using namespace bellsim;

const ExperimentModel& m2_model() {
  static const ExperimentModel m = m2_demo_scenario().model;
  return m;
}

void BM_TallySerial(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tally_trials_serial(m2_model(), {2, 2}, n, 1, 0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TallyParallel(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tally_trials(m2_model(), {2, 2}, n, 1, 0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StreamsSerial(benchmark::State& state) {
  const Schedule sched{static_cast<std::uint64_t>(state.range(0)) * 100, 100, SettingRule::random, {}};
  for (auto _ : state) benchmark::DoNotOptimize(generate_streams_serial(m2_model(), sched, 0.9, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StreamsParallel(benchmark::State& state) {
  const Schedule sched{static_cast<std::uint64_t>(state.range(0)) * 100, 100, SettingRule::random, {}};
  for (auto _ : state) benchmark::DoNotOptimize(generate_streams(m2_model(), sched, 0.9, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_TallySerial)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TallyParallel)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StreamsSerial)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StreamsParallel)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
