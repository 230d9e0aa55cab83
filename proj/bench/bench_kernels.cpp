#include <random>

#include <benchmark/benchmark.h>

#include "satsync/graph.hpp"
#include "satsync/protocols.hpp"
#include "satsync/scheduling.hpp"
#include "satsync/selection.hpp"
#include "satsync/sim.hpp"

namespace satsync {
namespace {

const AgentModel& triple() {
  static const AgentModel model = AgentModel::triple_integrator();
  return model;
}

// Fills one bracket table of the gain schedule (1023 Riccati solves).
void BM_BuildBracket(benchmark::State& state) {
  const auto execution = static_cast<Execution>(state.range(0));
  const RiccatiSolution hi = solve_scheduled_are(triple(), 0x1p-9);
  const RiccatiSolution lo = solve_scheduled_are(triple(), 0x1p-10);
  for (auto _ : state) benchmark::DoNotOptimize(build_bracket(triple(), lo, hi, execution));
  state.SetLabel(execution == Execution::kParallel ? "openmp" : "serial");
}
BENCHMARK(BM_BuildBracket)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Closed-loop batch over the vertex sample used by epsilon selection.
void BM_SimulateBatch(benchmark::State& state) {
  const auto execution = static_cast<Execution>(state.range(0));
  std::mt19937_64 rng(7);
  const Network net = random_rooted_network(3, rng);
  const ClosedLoop loop(triple(), net, make_protocol(ProtocolKind::kSemiglobalPartial, triple(), 0x1p-8));
  const std::vector<Vector> samples = vertex_samples(loop.layout(), {1.0, 1.0, 1.0});
  IntegratorOptions options;
  options.t_final = 10.0;
  options.rtol = 1e-6;
  options.atol = 1e-8;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_batch(loop, samples, options, execution));
  state.SetLabel(execution == Execution::kParallel ? "openmp" : "serial");
  state.counters["threads"] = max_threads();
  state.counters["samples"] = static_cast<double>(samples.size());
}
BENCHMARK(BM_SimulateBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace satsync

BENCHMARK_MAIN();
