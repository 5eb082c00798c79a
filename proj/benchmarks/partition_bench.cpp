#include "partmi/combinatorics.hpp"
#include "partmi/partition.hpp"

#include <benchmark/benchmark.h>

using namespace partmi;

static void BM_EnumeratePartitions(benchmark::State& state) {
    const int d = int(state.range(0));
    for (auto _ : state) {
        auto all = enumerate_partitions(d);
        benchmark::DoNotOptimize(all.data());
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(double(bell(d))));
}
BENCHMARK(BM_EnumeratePartitions)->Arg(6)->Arg(10)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_UniformSample(benchmark::State& state) {
    const int d = int(state.range(0));
    const UniformPartitionSampler sampler(d);
    Rng rng(1);
    for (auto _ : state) {
        auto p = sampler(rng);
        benchmark::DoNotOptimize(p.rgs().data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_UniformSample)->Arg(6)->Arg(20)->Arg(82);

static void BM_GibbsNeighbors(benchmark::State& state) {
    const int d = int(state.range(0));
    Rng rng(2);
    const auto p = sample_uniform_partition(d, rng);
    int element = 0;
    for (auto _ : state) {
        auto nbrs = gibbs_neighbors(p, element);
        benchmark::DoNotOptimize(nbrs.data());
        element = (element + 1) % d;
    }
}
BENCHMARK(BM_GibbsNeighbors)->Arg(6)->Arg(20)->Arg(82);

static void BM_MoveNeighborhood(benchmark::State& state) {
    const int d = int(state.range(0));
    Rng rng(3);
    const auto p = sample_uniform_partition(d, rng);
    for (auto _ : state) {
        auto merges = merge_neighbors(p);
        auto splits = split_neighbors(p);
        benchmark::DoNotOptimize(merges.data());
        benchmark::DoNotOptimize(splits.data());
    }
}
BENCHMARK(BM_MoveNeighborhood)->Arg(6)->Arg(12)->Arg(20);

BENCHMARK_MAIN();
