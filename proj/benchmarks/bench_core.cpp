#include "pmem/block_check.hpp"
#include "pmem/feature.hpp"
#include "pmem/memory_block.hpp"
#include "pmem/memory_map.hpp"
#include "pmem/predictor.hpp"
#include "pmem/scene_sim.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

using namespace pmem;

namespace {

CameraIntrinsics intrinsics(int size) { return intrinsics_from_fov(std::numbers::pi / 2, size, size); }

const Scene& room() {
    static const Scene scene = build_scene(random_room_spec(0, 8.0, 6));
    return scene;
}

const CameraPose kPose = CameraPose::upright(Vec3(4, 0.6, 4), 0.5);

void BM_Render(benchmark::State& state) {
    const CameraIntrinsics K = intrinsics(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(render(room(), kPose, K));
    state.SetItemsProcessed(state.iterations() * K.width * K.height);
}
BENCHMARK(BM_Render)->Arg(64)->Arg(256);

void BM_ExtractFeatures(benchmark::State& state) {
    const RgbdFrame frame = render(room(), kPose, intrinsics(64));
    for (auto _ : state) benchmark::DoNotOptimize(extract_features(frame));
}
BENCHMARK(BM_ExtractFeatures);

void BM_BuildMap(benchmark::State& state) {
    const CameraIntrinsics K = intrinsics(64);
    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> poses;
    for (int i = 0; i < state.range(0); ++i) {
        poses.push_back(CameraPose::upright(Vec3(4, 0.6, 4), 0.3 * i));
        frames.push_back(render(room(), poses.back(), K));
    }
    for (auto _ : state) benchmark::DoNotOptimize(build_map(frames, poses, K, GridSpec::desk()));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildMap)->Arg(1)->Arg(8);

// DDA traversal through a map built from a full turn
void BM_RenderFromMap(benchmark::State& state) {
    const CameraIntrinsics K = intrinsics(64);
    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> poses;
    for (int i = 0; i < 12; ++i) {
        poses.push_back(CameraPose::upright(Vec3(4, 0.6, 4), 0.52 * i));
        frames.push_back(render(room(), poses.back(), K));
    }
    const FeatureGrid map = build_map(frames, poses, K, GridSpec::desk());
    MapRenderOptions opts;
    opts.fill = state.range(0) ? FillRule::NearestToken : FillRule::Constant;
    for (auto _ : state) benchmark::DoNotOptimize(render_from_map(map, kPose, K, opts));
}
BENCHMARK(BM_RenderFromMap)->Arg(0)->Arg(1);

void BM_BlockForward(benchmark::State& state) {
    const BlockDims dims{64, 6, 96, 64, 64, 256};
    const BlockParams p = BlockParams::random(dims, 1);
    const BlockInputs in = random_block_inputs(dims, static_cast<int>(state.range(0)), 128, 2);
    for (auto _ : state) benchmark::DoNotOptimize(memory_block_forward(in, p));
}
BENCHMARK(BM_BlockForward)->Arg(16)->Arg(256);

void BM_BlockBackward(benchmark::State& state) {
    const BlockDims dims{64, 6, 96, 64, 64, 256};
    const BlockParams p = BlockParams::random(dims, 1);
    const BlockInputs in = random_block_inputs(dims, static_cast<int>(state.range(0)), 128, 2);
    BlockCache cache;
    const Matrix out = memory_block_forward(in, p, &cache);
    const Matrix upstream = Matrix::Ones(out.rows(), out.cols());
    for (auto _ : state) benchmark::DoNotOptimize(memory_block_backward(upstream, cache, p));
}
BENCHMARK(BM_BlockBackward)->Arg(16)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
