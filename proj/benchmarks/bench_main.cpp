#include "epigen/backward_chain.hpp"
#include "epigen/forward_sim.hpp"
#include "epigen/limit_solver.hpp"
#include "epigen/poisson_tree.hpp"

#include <benchmark/benchmark.h>

using namespace epigen;

namespace
{

struct Reference {
    IntensityKernel tau = IntensityKernel::exponential(1.5, 1.0);
    CourseModel model   = CourseModel::markov_sir(1.5, 1.0);
    ContactRate c       = ContactRate::piecewise_constant({4.0, 8.0}, {1.0, 0.3, 0.8});
    InitialCondition ic{0.01, AgeDensity::exponential(0.5), tau};
};

const Reference& reference()
{
    static const Reference r;
    return r;
}

void BM_SolveDelay(benchmark::State& state)
{
    const auto& r     = reference();
    const double step = 1.0 / static_cast<double>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_delay(r.tau, r.c, r.ic, 25.0, step).B.back());
    }
}
BENCHMARK(BM_SolveDelay)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Picard(benchmark::State& state)
{
    const auto& r = reference();
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_delay_picard(r.tau, r.c, r.ic, 10.0, 1e-2, 1e-8).iterations);
    }
}
BENCHMARK(BM_Picard)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state)
{
    const auto& r = reference();
    const auto n  = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate(r.model, n, r.c, r.ic, 25.0, seed++).infected_count(25.0));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(10'000)->Arg(50'000)->Unit(benchmark::kMillisecond);

void BM_TreeGeodesic(benchmark::State& state)
{
    const auto& r = reference();
    TreeParams p(r.tau, r.c, r.ic, static_cast<double>(state.range(0)));
    std::uint64_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_geodesic(p, tree_root(3, i++)).sigma);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TreeGeodesic)->Arg(5)->Arg(10);

void BM_HChain(benchmark::State& state)
{
    const auto& r   = reference();
    static const auto m = BackwardModel::from_solution(solve_delay(r.tau, r.c, r.ic, 25.0, 1e-2));
    std::uint64_t i = 0;
    for (auto _ : state) {
        Stream rng(5, StreamTag::chain, i++);
        benchmark::DoNotOptimize(sample_h_chain(static_cast<double>(state.range(0)), m, rng).times.size());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HChain)->Arg(5)->Arg(20);

} // namespace
BENCHMARK_MAIN();
