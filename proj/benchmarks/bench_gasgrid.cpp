#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <string>

#include <gasgrid/adaptivity.hpp>
#include <gasgrid/adjoint.hpp>
#include <gasgrid/compressor.hpp>
#include <gasgrid/io.hpp>

using namespace gasgrid;

namespace {

const std::string kData = GASGRID_DATA_DIR;

struct Tutorial {
  NetworkSpec spec;
  ScenarioSpec scenario;
  PreparedRun run;
};

const Tutorial& tutorial() {
  static const Tutorial t = [] {
    Tutorial t;
    t.spec = parse_network(kData + "/tutorial.json");
    t.scenario = parse_scenario(kData + "/tutorial_scenario.json", t.spec);
    t.run = prepare_run(t.spec, t.scenario, t.scenario.adaptivity.dx_max);
    return t;
  }();
  return t;
}

void BM_SteadyState(benchmark::State& state) {
  const Tutorial& t = tutorial();
  const auto level = static_cast<ModelLevel>(state.range(0));
  const auto a = ModelAssignment::uniform(t.run.network, 3600, 3600, 900, level, 2500);
  auto lay = std::make_shared<const SystemLayout>(t.run.network, a.blocks[0].pipes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(steady_state(t.run.network, lay, t.run.controls));
  }
  state.counters["unknowns"] = static_cast<double>(lay->size());
}
BENCHMARK(BM_SteadyState)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_FixedSimulation(benchmark::State& state) {
  const Tutorial& t = tutorial();
  const auto level = static_cast<ModelLevel>(state.range(0));
  const auto a = ModelAssignment::uniform(t.run.network, t.scenario.horizon, 3600, 900, level, 5000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(t.run.network, a, t.run.controls, t.run.initial, {}, true));
  }
}
BENCHMARK(BM_FixedSimulation)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_AdaptiveSimulation(benchmark::State& state) {
  const Tutorial& t = tutorial();
  AdaptiveOptions opts = t.scenario.adaptivity;
  opts.tol = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adaptive_simulate(t.run.network, t.run.controls,
                                               t.scenario.functional, t.run.initial, opts));
  }
}
BENCHMARK(BM_AdaptiveSimulation)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

void BM_ControlGradient(benchmark::State& state) {
  const Tutorial& t = tutorial();
  const auto a = ModelAssignment::uniform(t.run.network, t.scenario.horizon, 3600, 900,
                                          ModelLevel::M2, 5000);
  const Trajectory tr = simulate(t.run.network, a, t.run.controls, t.run.initial, {}, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(functional_control_gradient(t.run.network, tr, t.scenario.functional));
  }
  state.counters["controls"] = static_cast<double>(t.run.controls.size());
}
BENCHMARK(BM_ControlGradient)->Unit(benchmark::kMillisecond);

void BM_BuildSemiconvex(benchmark::State& state) {
  const CharacteristicField f = parse_field(kData + "/fields/station_b.json");
  const auto levels = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_semiconvex(f, levels));
}
BENCHMARK(BM_BuildSemiconvex)->RangeMultiplier(4)->Range(8, 512);

}  // namespace

BENCHMARK_MAIN();
