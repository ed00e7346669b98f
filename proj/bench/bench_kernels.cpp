// Serial vs OpenMP likelihood+gradient kernel, and batch estimation.

#include <benchmark/benchmark.h>

#include <vector>

#include "mdhp/likelihood.hpp"
#include "mdhp/rng.hpp"
#include "mdhp/solver.hpp"

using namespace mdhp;

namespace {

EventSequences make_events(std::size_t dims, std::size_t per_dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> times(dims);
    for (auto& seq : times) {
        for (std::size_t k = 0; k < per_dim; ++k) seq.push_back(rng.uniform());
    }
    return EventSequences(std::move(times), 1.0);
}

void run_kernel(benchmark::State& state, Kernel kernel) {
    const auto dims = static_cast<std::size_t>(state.range(0));
    const auto per_dim = static_cast<std::size_t>(state.range(1));
    const auto pe = pad_and_stack(make_events(dims, per_dim, 7));
    const auto p = MdhpParams::uniform(dims, 0.5, 1.0, 0.1);
    LikelihoodGradient g;
    for (auto _ : state) {
        benchmark::DoNotOptimize(log_likelihood_and_grad(p, pe, 1.0, g, kernel));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * dims * per_dim));
}

void BM_LikelihoodSerial(benchmark::State& state) { run_kernel(state, Kernel::serial); }
void BM_LikelihoodParallel(benchmark::State& state) { run_kernel(state, Kernel::parallel); }

void sizes(benchmark::internal::Benchmark* b) {
    for (int d : {2, 6, 10})
        for (int l : {32, 128}) b->Args({d, l});
}

BENCHMARK(BM_LikelihoodSerial)->Apply(sizes);
BENCHMARK(BM_LikelihoodParallel)->Apply(sizes);

void BM_BatchEstimate(benchmark::State& state) {
    std::vector<EventSequences> windows;
    for (std::uint64_t k = 0; k < 8; ++k) windows.push_back(make_events(6, 20, k));
    SolverConfig cfg;
    cfg.max_epochs = 50;
    for (auto _ : state) {
        benchmark::DoNotOptimize(batch_estimate(windows, cfg, static_cast<std::size_t>(state.range(0))));
    }
}
BENCHMARK(BM_BatchEstimate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
