#include <benchmark/benchmark.h>

#include "cbdi/classifier.hpp"
#include "cbdi/generator.hpp"
#include "cbdi/simulator.hpp"

using namespace cbdi;

namespace {

const LevyMeasure& heavy_tail() {
    static const LevyMeasure levy = LevyMeasure::pareto_log_tail(0.5, 0.0, 1.0, 1.0);
    return levy;
}

void BM_PsiEval(benchmark::State& state) {
    const Mechanism m(1.0, 0.5, heavy_tail());
    double z = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(m.psi(z));
        z = z < 50.0 ? z * 1.1 : 0.1;
    }
}
BENCHMARK(BM_PsiEval);

void BM_JumpSample(benchmark::State& state) {
    RngStream rng(1, 0, StreamRole::JumpSize);
    const auto& levy = heavy_tail();
    for (auto _ : state) benchmark::DoNotOptimize(levy.sample_above(1.0, rng));
}
BENCHMARK(BM_JumpSample);

void BM_ClassifyIntegrals(benchmark::State& state) {
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(integral_J(heavy_tail(), d));
    }
}
BENCHMARK(BM_ClassifyIntegrals);

void BM_GeneratorApply(benchmark::State& state) {
    const Mechanism m(0.0, 0.0, heavy_tail());
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    const auto f2 = TestFunction::lyapunov_f2(d);
    double z = 2.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_generator(m, d, f2, z));
        z = z < 1e6 ? z * 2.0 : 2.0;
    }
}
BENCHMARK(BM_GeneratorApply);

void BM_SimulatePathSteps(benchmark::State& state) {
    const Mechanism m(1.0, 0.2, LevyMeasure::point_mass(2.0, 0.5));
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0;
    cfg.seed = 3;
    uint64_t idx = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_path(m, DriftSpec::logistic(1.0), 5.0, cfg, idx++));
    }
    state.SetItemsProcessed(state.iterations() * 1000); // base steps per path
}
BENCHMARK(BM_SimulatePathSteps);

void BM_CoupledBundle(benchmark::State& state) {
    const Mechanism m(0.0, 0.0, LevyMeasure::point_mass(1.0, 1.0));
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0;
    cfg.seed = 5;
    const std::vector<double> inits = {1.0, 2.0, 4.0, 8.0};
    uint64_t idx = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            simulate_coupled(m, DriftSpec::none(), inits, cfg, idx++));
    }
}
BENCHMARK(BM_CoupledBundle);

} // namespace

BENCHMARK_MAIN();
