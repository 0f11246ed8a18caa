#include <benchmark/benchmark.h>

#include "rcmodal/bench.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/refsim.hpp"

namespace {

using namespace rcmodal;

// 1000 output steps of the saturating driver on the speed-experiment
// circuits; cost per step grows with the dense LU, O(n^3).
void BM_Simulate1000Steps(benchmark::State& state) {
    const auto order = static_cast<int>(state.range(0));
    const SpeedOptions opt;
    const RcNetwork net = speed_network(order, opt);
    SimConfig cfg;
    cfg.t_end = opt.t_end;
    cfg.dt = opt.t_end / opt.steps;
    const DriverModel driver = DriverModel::matched(net);
    SimStats stats;
    for (auto _ : state) benchmark::DoNotOptimize(simulate(net, driver, cfg, &stats));
    state.counters["newton_per_step"] =
        static_cast<double>(stats.newton_iterations) / static_cast<double>(std::max<std::size_t>(stats.steps, 1));
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Simulate1000Steps)->DenseRange(1, 10, 1)->Unit(benchmark::kMicrosecond);

}  // namespace
