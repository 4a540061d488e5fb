#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "drsf/dro.hpp"
#include "drsf/error.hpp"
#include "drsf/harness.hpp"
#include "drsf/network_io.hpp"
#include "drsf/power_flow.hpp"
#include "drsf/safety_filter.hpp"

using namespace drsf;

namespace {

grid::Network feeder()
{
    return grid::load_network(DRSF_DATA_DIR "/ieee33_pv_bus.csv", DRSF_DATA_DIR "/ieee33_line.csv");
}

dro::ErrorSampleSet scalar_samples(std::size_t n)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 0.2);
    dro::ErrorSampleSet set;
    set.kind = dro::ErrorKind::Substation;
    for (std::size_t s = 0; s < n; ++s) set.samples.push_back({g(rng)});
    return set;
}

}  // namespace

static void BM_PowerFlow33(benchmark::State& state)
{
    const auto net = feeder();
    for (auto _ : state) benchmark::DoNotOptimize(grid::solve_power_flow(net));
}
BENCHMARK(BM_PowerFlow33)->Unit(benchmark::kMicrosecond);

static void BM_FilterSolve33(benchmark::State& state)
{
    const auto net = grid::scale_injections(feeder(), 0.6, 1.0);
    filter::DRSFConfig cfg;
    cfg.bounds = filter::BoundSet::zero(net);
    std::vector<double> q;
    for (const auto& u : net.pv_units()) q.push_back(-u.q_max());
    for (auto _ : state) benchmark::DoNotOptimize(filter::filter_action(net, q, cfg));
}
BENCHMARK(BM_FilterSolve33)->Unit(benchmark::kMillisecond);

static void BM_FilterFallback33(benchmark::State& state)
{
    const auto net = feeder();
    const auto samples = sim::generate_error_samples(net, 0.3, 50, 11);
    filter::DRSFConfig cfg;
    cfg.bounds = sim::compute_bounds(samples, {0.01, 0.1});
    const std::vector<double> q(net.pv_units().size(), 0.0);
    for (auto _ : state) benchmark::DoNotOptimize(filter::filter_action_fallback(net, q, cfg));
}
BENCHMARK(BM_FilterFallback33)->Unit(benchmark::kMillisecond);

static void BM_ScalarBounds(benchmark::State& state)
{
    const auto set = scalar_samples(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(dro::solve_bounds(set, {0.01, 0.1}));
}
BENCHMARK(BM_ScalarBounds)->Arg(50)->Arg(500)->Unit(benchmark::kMicrosecond);

static void BM_ScalarBoundsMip(benchmark::State& state)
{
    const auto set = scalar_samples(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(dro::solve_bounds_mip(set, {0.01, 0.1}));
}
BENCHMARK(BM_ScalarBoundsMip)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_VoltageBounds(benchmark::State& state)
{
    const auto samples = sim::generate_error_samples(feeder(), 0.3, 50, 11);
    for (auto _ : state) benchmark::DoNotOptimize(dro::solve_bounds(samples.voltage, {0.01, 0.1}));
}
BENCHMARK(BM_VoltageBounds)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
