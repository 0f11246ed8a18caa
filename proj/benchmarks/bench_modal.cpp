#include <benchmark/benchmark.h>

#include "rcmodal/decomposition.hpp"
#include "rcmodal/network.hpp"

namespace {

using namespace rcmodal;

void BM_ExtractTransferFunction(benchmark::State& state) {
    const auto order = static_cast<int>(state.range(0));
    const NodalSystem sys = assemble_nodal(generate_network(order, Topology::Ladder, 3));
    for (auto _ : state) benchmark::DoNotOptimize(extract_transfer_function(sys));
}
BENCHMARK(BM_ExtractTransferFunction)->DenseRange(1, 10, 3);

void BM_Decompose(benchmark::State& state) {
    const auto order = static_cast<int>(state.range(0));
    const TransferFunction h = extract_transfer_function(assemble_nodal(generate_network(order, Topology::Tree, 3)));
    for (auto _ : state) benchmark::DoNotOptimize(decompose(h));
}
BENCHMARK(BM_Decompose)->DenseRange(1, 10, 1);

// Leverrier-Faddeev kept for comparison with the tree recursion.
void BM_LeverrierTransferFunction(benchmark::State& state) {
    const auto order = static_cast<int>(state.range(0));
    const NodalSystem sys = assemble_nodal(generate_network(order, Topology::Ladder, 3));
    for (auto _ : state) benchmark::DoNotOptimize(leverrier_transfer_function(sys));
}
BENCHMARK(BM_LeverrierTransferFunction)->DenseRange(1, 10, 3);

}  // namespace
