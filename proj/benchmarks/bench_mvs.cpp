#include <benchmark/benchmark.h>

#include "gsrec/mvs.hpp"
#include "gsrec/synthdata.hpp"

using namespace gsrec;

namespace {

struct Fixture {
    ViewBundle bundle;
    SweepConfig cfg;
    Fixture() {
        const SceneSpec spec = textured_plane_spec(0.0, 0.8, 5);
        const TestScene scene = make_test_scene(spec);
        bundle = make_view_bundle(scene, spec, 3, 0.0, 2.5, 96, 5);
        cfg.depth_min = 1.6;
        cfg.depth_max = 3.6;
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

static void BM_PlaneSweep(benchmark::State& state) {
    const auto& f = fixture();
    const std::vector<Image> srcs = {f.bundle.images[1], f.bundle.images[2]};
    const std::vector<Camera> cams = {f.bundle.gt_cameras[1], f.bundle.gt_cameras[2]};
    SweepConfig cfg = f.cfg;
    cfg.num_hypotheses = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            plane_sweep_depth(f.bundle.images[0], f.bundle.gt_cameras[0], srcs, cams, cfg));
    }
}
BENCHMARK(BM_PlaneSweep)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
