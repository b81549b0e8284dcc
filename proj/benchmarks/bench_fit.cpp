#include <benchmark/benchmark.h>

#include <regimes/estimation.hpp>
#include <regimes/simulate.hpp>

namespace {

void BM_fit_two_regimes(benchmark::State& state) {
    auto p = regimes::Parameters::make(1, regimes::VarianceFamily::common);
    p.beta = 0.5;
    p.sigma2[0] = 1.0;
    const auto y = regimes::simulate_series(p, static_cast<std::size_t>(state.range(0)) + 1, std::nullopt, 3);
    regimes::ModelSpec spec;
    spec.regimes = 2;
    spec.family = state.range(1) ? regimes::VarianceFamily::switching : regimes::VarianceFamily::common;
    for (auto _ : state) {
        auto f = regimes::fit(y, spec);
        benchmark::DoNotOptimize(f.loglik);
    }
}

void BM_em_step(benchmark::State& state) {
    auto p = regimes::Parameters::make(2, regimes::VarianceFamily::common);
    p.mu << -1.0, 1.0;
    p.beta = 0.5;
    p.sigma2[0] = 1.0;
    p.transition << 0.7, 0.3, 0.3, 0.7;
    const auto y = regimes::simulate_series(p, static_cast<std::size_t>(state.range(0)), std::nullopt, 5);
    regimes::PenaltyContext ctx;
    ctx.eps = 0.05;
    for (auto _ : state) {
        auto q = regimes::em_step(y, p, p.xi, ctx);
        benchmark::DoNotOptimize(q.beta);
    }
}

}  // namespace

BENCHMARK(BM_fit_two_regimes)->Args({200, 0})->Args({200, 1})->Args({500, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_em_step)->RangeMultiplier(4)->Range(64, 4096);
