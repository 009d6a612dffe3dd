#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "dgne/delay.hpp"
#include "dgne/engine.hpp"
#include "dgne/game.hpp"
#include "dgne/steps.hpp"
#include "dgne/topology.hpp"

namespace {

// Clusters of equal size, each a path with a few random chords, chained by
// bridges between the last agent of one cluster and the first of the next.
dgne::TopologySpec random_topology(int clusters, int size, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<dgne::Graph::Edge> edges;
  for (int c = 0; c < clusters; ++c) {
    const int base = c * size;
    for (int j = 0; j + 1 < size; ++j) edges.push_back({base + j, base + j + 1});
    std::uniform_int_distribution<int> pick(0, size - 1);
    for (int k = 0; k < size / 4; ++k) {
      int u = pick(rng), v = pick(rng);
      if (u > v) std::swap(u, v);
      if (v > u + 1) edges.push_back({base + u, base + v});
    }
    if (c + 1 < clusters) edges.push_back({base + size - 1, base + size});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  dgne::ClusterLayout layout(std::vector<int>(clusters, size));
  dgne::Graph global(clusters * size, edges);
  std::vector<dgne::Graph> local;
  for (int c = 0; c < clusters; ++c) local.push_back(dgne::induced_cluster_graph(layout, global, c));
  return {layout, global, local};
}

struct Fixture {
  static constexpr int kHorizon = 200;

  explicit Fixture(int clusters, int size)
      : network(dgne::build_network(random_topology(clusters, size, 7))),
        game(dgne::quadratic_ring_game(network.layout, kHorizon)),
        calendar(dgne::make_calendar(*dgne::constant_delay_schedule(5), network.layout,
                                     kHorizon)),
        steps(dgne::make_step_schedule({dgne::StepKind::tuned}, kHorizon)) {}

  dgne::Network network;
  std::shared_ptr<const dgne::Game> game;
  dgne::FeedbackCalendar calendar;
  dgne::StepSchedule steps;
};

void run_rounds(benchmark::State& state, dgne::KernelChoice kernel) {
  const Fixture f(static_cast<int>(state.range(0)), 16);
  dgne::RunOptions options;
  options.kernel = kernel;
  options.record = false;
  for (auto _ : state) {
    auto traj = dgne::run(*f.game, f.network, f.calendar, f.steps,
                          dgne::initial_state(*f.game, 1.0, 1.0), Fixture::kHorizon, options);
    benchmark::DoNotOptimize(traj.final_state.x.data());
  }
  state.counters["agents"] = static_cast<double>(f.network.layout.agent_count());
  state.counters["rounds/s"] = benchmark::Counter(
      static_cast<double>(Fixture::kHorizon) * state.iterations(), benchmark::Counter::kIsRate);
}

void BM_RoundSerial(benchmark::State& state) { run_rounds(state, dgne::KernelChoice::serial); }
void BM_RoundParallel(benchmark::State& state) { run_rounds(state, dgne::KernelChoice::parallel); }

BENCHMARK(BM_RoundSerial)->Arg(4)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RoundParallel)->Arg(4)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
