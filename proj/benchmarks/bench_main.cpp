#include "dualline/idaf.hpp"
#include "dualline/mixture.hpp"
#include "dualline/pipeline.hpp"
#include "dualline/rng.hpp"
#include "dualline/sweep.hpp"

#include <benchmark/benchmark.h>

using namespace dualline;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    DeterministicRng rng(seed);
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

void BM_Fuse(benchmark::State& state) {
    const Tensor sem = random_tensor({2, 3, 16, 16}, 1);
    const Tensor id = random_tensor({2, 3, 16, 16}, 2);
    const FusionConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse(sem, id, cfg));
    }
}
BENCHMARK(BM_Fuse);

void BM_FuseReference(benchmark::State& state) {
    const Tensor sem = random_tensor({2, 3, 16, 16}, 1);
    const Tensor id = random_tensor({2, 3, 16, 16}, 2);
    const FusionConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse_reference(sem, id, cfg));
    }
}
BENCHMARK(BM_FuseReference);

void BM_EpsPredict(benchmark::State& state) {
    const PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    const BranchMixtures mix = build_branch_mixtures(world, 0, 0, cfg.idap_bias, cfg.id_variance, cfg.closeup_fill);
    const NoiseSchedule schedule = NoiseSchedule::make();
    const Tensor x = random_tensor({3, 16, 16}, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(eps_predict(x, 500, mix.uncond, schedule));
    }
}
BENCHMARK(BM_EpsPredict);

void BM_DualLineRun(benchmark::State& state) {
    const PipelineConfig cfg;
    const ToyWorld world = build_world(cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_dual_line(world, cfg));
    }
}
BENCHMARK(BM_DualLineRun);

}  // namespace

BENCHMARK_MAIN();
