// OpenMP kernels against their serial references. Run from the repository
// root so the bundled scenario resolves.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "evfleet/fleet.hpp"
#include "evfleet/network.hpp"
#include "evfleet/scenario.hpp"
#include "evfleet/sweep.hpp"

using namespace evfleet;

namespace {

std::vector<Coord> random_points(std::size_t n, double extent) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Coord> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

void BM_Snap(benchmark::State& state, bool parallel) {
  const RoadNetwork net = generate_grid(30, 30, 300.0, 13.9);
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 29 * 300.0);
  for (auto _ : state) {
    auto out = parallel ? nearest_edges(net, pts) : nearest_edges_serial(net, pts);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Schedule(benchmark::State& state, Execution exec) {
  const ScenarioConfig cfg = load_config("scenarios/default.json");
  const RoadNetwork net = build_network(cfg);
  const Depot depot = make_depot(net, *net.find_edge(cfg.depot_edge));
  const RoutingSettings settings{cfg.policies.routing, cfg.vehicle, cfg.environment,
                                 cfg.numerics.dt_s};
  for (auto _ : state) {
    RandomStreams rng = RandomStreams::from_seed(cfg.seed);
    auto trips = generate_day_schedule(rng, cfg.demand, cfg.fleet_size, net, depot, settings, exec);
    benchmark::DoNotOptimize(trips.data());
  }
}

void BM_Sweep(benchmark::State& state, Execution exec) {
  const ScenarioConfig cfg = load_config("scenarios/default.json");
  const std::vector<double> sizes{100, 90, 80, 70, 60};
  for (auto _ : state) {
    auto rows = run_sweep(cfg, "fleet.size", sizes, exec);
    benchmark::DoNotOptimize(rows.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_Snap, parallel, true)->Arg(10'000);
BENCHMARK_CAPTURE(BM_Snap, serial, false)->Arg(10'000);
BENCHMARK_CAPTURE(BM_Schedule, parallel, Execution::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Schedule, serial, Execution::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Sweep, parallel, Execution::Parallel)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK_CAPTURE(BM_Sweep, serial, Execution::Serial)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
