#include <benchmark/benchmark.h>

#include <vector>

#include "rcmodal/bench.hpp"
#include "rcmodal/decomposition.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/surrogate.hpp"

namespace {

using namespace rcmodal;

// Untrained modules cost the same to evaluate as trained ones.
SurrogateBundle untrained_bundle(int modules) {
    SurrogateBundle b;
    b.base.emplace(b.config, TokenLayout::Base, 1);
    for (int j = 1; j <= modules; ++j) b.residuals.emplace_back(b.config, TokenLayout::Residual, 1 + j);
    return b;
}

void BM_Infer1000Steps(benchmark::State& state) {
    const auto order = static_cast<int>(state.range(0));
    SurrogateBundle bundle = untrained_bundle(3);
    const SpeedOptions speed;
    const auto modes = to_gain_form(decompose(extract_transfer_function(assemble_nodal(speed_network(order, speed)))));
    std::vector<double> times(static_cast<std::size_t>(speed.steps) + 1);
    for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k) * speed.t_end / speed.steps;
    InferOptions opt;
    opt.allow_extrapolation = true;
    for (auto _ : state) benchmark::DoNotOptimize(infer(bundle, modes, DriverKind::Saturating, times, opt));
}
BENCHMARK(BM_Infer1000Steps)->DenseRange(1, 10, 3)->Unit(benchmark::kMillisecond);

void BM_ForwardBatch(benchmark::State& state) {
    const auto tq = static_cast<int>(state.range(0));
    AttentionRegressor model(AttentionRegressorConfig{}, TokenLayout::Residual, 9);
    QueryBatch b;
    b.groups = 4;
    b.tq = tq;
    b.device.assign(4, 1);
    b.index = {1, 2, 3, 4};
    b.modes = Mat::Constant(4, 4, 0.5);
    b.times = Mat::Constant(4 * tq, 1, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(b));
}
BENCHMARK(BM_ForwardBatch)->RangeMultiplier(4)->Range(16, 1024)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
