#include <benchmark/benchmark.h>

#include <regimes/likelihood.hpp>
#include <regimes/simulate.hpp>

namespace {

regimes::Parameters two_regimes() {
    auto p = regimes::Parameters::make(2, regimes::VarianceFamily::common);
    p.mu << -1.0, 1.0;
    p.beta = 0.5;
    p.sigma2[0] = 1.0;
    p.transition << 0.7, 0.3, 0.3, 0.7;
    return p;
}

void BM_filter(benchmark::State& state) {
    const auto p = two_regimes();
    const auto y = regimes::simulate_series(p, static_cast<std::size_t>(state.range(0)), std::nullopt, 1);
    for (auto _ : state) {
        auto r = regimes::filter(y, p);
        benchmark::DoNotOptimize(r.loglik);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_loglik(benchmark::State& state) {
    const auto p = two_regimes();
    const auto y = regimes::simulate_series(p, static_cast<std::size_t>(state.range(0)), std::nullopt, 1);
    for (auto _ : state) benchmark::DoNotOptimize(regimes::loglik(y, p));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_smooth(benchmark::State& state) {
    const auto p = two_regimes();
    const auto y = regimes::simulate_series(p, static_cast<std::size_t>(state.range(0)), std::nullopt, 1);
    for (auto _ : state) {
        auto s = regimes::smooth(y, p);
        benchmark::DoNotOptimize(s.smoothed.data());
    }
}

}  // namespace

BENCHMARK(BM_filter)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_loglik)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_smooth)->RangeMultiplier(4)->Range(64, 4096);
