#include <benchmark/benchmark.h>

#include "gsrec/rasterizer.hpp"
#include "gsrec/rng.hpp"
#include "gsrec/synthdata.hpp"

using namespace gsrec;

namespace {

Camera bench_camera(int size) {
    OrbitPose orbit;
    orbit.radius = 2.6;
    Intrinsics intr;
    intr.width = intr.height = size;
    intr.fx = intr.fy = 0.5 * size / std::tan(0.5 * 40.0 * M_PI / 180.0);
    intr.cx = intr.cy = 0.5 * (size - 1);
    return camera_from_orbit(orbit, intr);
}

const TestScene& subject() {
    static const TestScene scene = make_test_scene(human_standin_spec(3));
    return scene;
}

}  // namespace

static void BM_RenderForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Camera cam = bench_camera(size);
    RenderConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(render(subject().scene, cam, cfg));
    }
    state.counters["gaussians"] = static_cast<double>(subject().scene.size());
}
BENCHMARK(BM_RenderForward)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_RenderBackward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const Camera cam = bench_camera(size);
    RenderConfig cfg;
    Image grad(size, size, 3, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_backward(subject().scene, cam, cfg, grad));
    }
}
BENCHMARK(BM_RenderBackward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
