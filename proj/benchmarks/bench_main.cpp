#include "eitbin/coarse.hpp"
#include "eitbin/config.hpp"
#include "eitbin/fem.hpp"
#include "eitbin/grad.hpp"
#include "eitbin/opt.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

using namespace eitbin;

namespace {

struct Rig {
    Mesh mesh;
    ElectrodeLayout layout;
    ExcitationScheme scheme{default_voltage_pattern()};
    ConductivityField truth;
    MeasurementSet target;
    BlendControl basis;
};

const Rig& rig(int elements) {
    static std::map<int, std::unique_ptr<Rig>> cache;
    auto& r = cache[elements];
    if (!r) {
        r = std::make_unique<Rig>();
        r->mesh = build_disc_mesh(0.1, elements);
        r->layout = place_electrodes(r->mesh, 16, 0.12, 0.1);
        r->truth = make_true_model(r->mesh, model1_circles(), 0.4, 0.2);
        r->target = simulate_measurements(r->mesh, r->layout, r->truth, r->scheme);
        for (std::uint64_t i = 0; i < 10; ++i) {
            Rng rng = substream(1, "collection", i);
            r->basis.basis.push_back(sample_random(rng, 0.1, 8, 0.3));
            r->basis.weights.push_back(0.1);
        }
    }
    return *r;
}

void BM_Factorize(benchmark::State& state) {
    const Rig& r = rig(static_cast<int>(state.range(0)));
    ForwardSolver solver(r.mesh, r.layout);
    for (auto _ : state) solver.set_conductivity(r.truth);
}

// One cost evaluation: factorization plus m forward solves.
void BM_CostEvaluation(benchmark::State& state) {
    const Rig& r = rig(static_cast<int>(state.range(0)));
    CostEvaluator eval({&r.mesh, &r.layout, &r.scheme, &r.target, nullptr});
    const ConductivityField sigma = blend(r.mesh, r.basis, 0.4, 0.2);
    for (auto _ : state) benchmark::DoNotOptimize(eval.evaluate(sigma));
}

void BM_SpatialGradient(benchmark::State& state) {
    const Rig& r = rig(static_cast<int>(state.range(0)));
    CostEvaluator eval({&r.mesh, &r.layout, &r.scheme, &r.target, nullptr});
    eval.evaluate(blend(r.mesh, r.basis, 0.4, 0.2));
    for (auto _ : state) benchmark::DoNotOptimize(eval.gradient_at_last());
}

void BM_Rasterize(benchmark::State& state) {
    const Rig& r = rig(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(blend(r.mesh, r.basis, 0.4, 0.2));
}

void BM_GradP(benchmark::State& state) {
    const Rig& r = rig(static_cast<int>(state.range(0)));
    CostEvaluator eval({&r.mesh, &r.layout, &r.scheme, &r.target, nullptr});
    eval.evaluate(blend(r.mesh, r.basis, 0.4, 0.2));
    const SpatialGradient g = eval.gradient_at_last();
    for (auto _ : state) benchmark::DoNotOptimize(grad_P(r.mesh, r.basis, {0.4, 0.2}, g, 1e-3));
}

void BM_Partition(benchmark::State& state) {
    const Rig& r = rig(static_cast<int>(state.range(0)));
    const ConductivityField fine = blend(r.mesh, r.basis, 0.4, 0.2);
    const auto [zeta, partition] = initial_coarse_state(r.mesh, fine, 3);
    for (auto _ : state) benchmark::DoNotOptimize(partition_field(r.mesh, fine, zeta, &partition));
}

}  // namespace

BENCHMARK(BM_Factorize)->Arg(2032)->Arg(7726)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CostEvaluation)->Arg(2032)->Arg(7726)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SpatialGradient)->Arg(2032)->Arg(7726)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rasterize)->Arg(2032)->Arg(7726)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradP)->Arg(2032)->Arg(7726)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Partition)->Arg(2032)->Arg(7726)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
