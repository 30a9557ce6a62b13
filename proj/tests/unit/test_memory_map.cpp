#include <doctest.h>

#include "pmem/memory_map.hpp"
#include "pmem/random.hpp"
#include "pmem/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace pmem;

namespace {

struct Views {
    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> poses;
    CameraIntrinsics k;
};

Views collect(std::uint64_t seed, int stride = 2) {
    const Scene scene = build_scene(random_room_spec(seed, 8.0, 5));
    CollectOptions opts;
    opts.stride = stride;
    Views v;
    v.k = intrinsics_from_fov(std::numbers::pi / 2, 32, 32);
    const Trajectory t = collect_trajectory(scene, v.k, seed, opts);
    v.frames = t.frames;
    for (std::size_t s : t.frame_steps) v.poses.push_back(t.poses[s]);
    return v;
}

PluckerImage random_plucker(Rng& rng, int w, int h) {
    PluckerImage p;
    p.width = w;
    p.height = h;
    p.data.resize(static_cast<std::size_t>(w) * h * 6);
    for (double& v : p.data) v = rng.uniform(-1, 1);
    return p;
}

}  // namespace

TEST_CASE("grid spec addressing") {
    const GridSpec desk = GridSpec::desk();
    CHECK(desk.dims == std::array<int, 3>{64, 8, 64});
    CHECK(desk.cell == Vec3(0.25, 1.0, 0.25));
    CHECK(desk.feature_dim == 12);
    const auto idx = desk.cell_of(Vec3(0.1, 0.0, 0.3));
    REQUIRE(idx);
    CHECK(*idx == CellIndex{16, 0, 17});
    CHECK_FALSE(desk.cell_of(Vec3(-4.01, 0, 0)));
    CHECK_FALSE(desk.cell_of(Vec3(0, 7.2, 0)));
    CHECK((desk.cell_center({16, 0, 17}) - Vec3(0.125, -0.4, 0.375)).norm() < 1e-12);

    GridSpec bad;
    bad.cell = Vec3(0.25, 0.0, 0.25);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(FeatureGrid{bad}, std::invalid_argument);
}

TEST_CASE("build_map basic cases") {
    const CameraIntrinsics k{1.0, 1.0, 1.5, 1.5, 3, 3};
    GridSpec spec;
    spec.origin = Vec3(-1, -1, -1);
    spec.cell = Vec3(1, 1, 1);
    spec.dims = {4, 4, 4};

    RgbdFrame blank(3, 3);
    const CameraPose id = CameraPose::identity();
    CHECK(build_map(std::span(&blank, 1), std::span(&id, 1), k, spec, {3, 1}).empty());
    CHECK_THROWS_AS(build_map(std::span<const RgbdFrame>(), std::span<const CameraPose>(), k, spec), std::invalid_argument);
    const std::vector<CameraPose> two(2);
    CHECK_THROWS_AS(build_map(std::span(&blank, 1), two, k, spec), std::invalid_argument);

    RgbdFrame axis(3, 3);
    axis.depth_at(1, 1) = 1.0f;
    const FeatureGrid g = build_map(std::span(&axis, 1), std::span(&id, 1), k, spec, {3, 1});
    CHECK(g.count() == 1);
    CHECK(g.contains({1, 1, 2}));
}

TEST_CASE("full-scale grids are addressable") {
    const GridSpec full = GridSpec::full_scale();
    CHECK(full.dims == std::array<int, 3>{256, 32, 256});
    CHECK(full.feature_dim == 384);
    CHECK(full.total_cells() == 256ull * 32 * 256);
    FeatureGrid g(full);
    std::vector<float> f(384, 0.5f);
    g.merge_max({255, 31, 255}, f);
    g.merge_max({0, 0, 0}, f);
    CHECK(g.count() == 2);
    REQUIRE(g.find({255, 31, 255}));
    CHECK(g.find({255, 31, 255})->size() == 384);
    CHECK(g.feature({1, 2, 3}) == std::vector<float>(384, 0.0f));
    CHECK_THROWS_AS(g.merge_max({256, 0, 0}, f), std::out_of_range);
}

TEST_CASE("update_map identities") {
    const Views a = collect(1), b = collect(2);
    const GridSpec spec = GridSpec::desk();
    const FeatureGrid ma = build_map(a.frames, a.poses, a.k, spec);
    const FeatureGrid mb = build_map(b.frames, b.poses, b.k, spec);
    REQUIRE(ma.count() > 0);

    CHECK(update_map(ma, FeatureGrid(spec)) == ma);
    CHECK(update_map(FeatureGrid(spec), ma) == ma);
    CHECK(update_map(ma, ma) == ma);
    const FeatureGrid ab = update_map(ma, mb);
    CHECK(ab == update_map(mb, ma));

    std::vector<RgbdFrame> frames = a.frames;
    frames.insert(frames.end(), b.frames.begin(), b.frames.end());
    std::vector<CameraPose> poses = a.poses;
    poses.insert(poses.end(), b.poses.begin(), b.poses.end());
    CHECK(ab == build_map(frames, poses, a.k, spec));

    // monotone: every component of every old cell is <= the merged one
    for (const CellIndex& idx : ma.sorted_indices()) {
        const auto before = *ma.find(idx);
        const auto after = *ab.find(idx);
        for (std::size_t k = 0; k < before.size(); ++k) REQUIRE(after[k] >= before[k]);
    }
    CHECK(ab.count() >= std::max(ma.count(), mb.count()));

    GridSpec other = spec;
    other.origin = Vec3::Zero();
    CHECK_THROWS_AS(update_map(ma, FeatureGrid(other)), std::invalid_argument);
}

TEST_CASE("build_map is frame-order invariant and incremental equals batch") {
    const Views v = collect(3, 1);
    const GridSpec spec = GridSpec::desk();
    const FeatureGrid batch = build_map(v.frames, v.poses, v.k, spec);

    Rng rng(3);
    std::vector<std::size_t> order(v.frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> poses;
    for (std::size_t i : order) {
        frames.push_back(v.frames[i]);
        poses.push_back(v.poses[i]);
    }
    CHECK(build_map(frames, poses, v.k, spec) == batch);

    FeatureGrid running(spec);
    std::size_t previous = 0;
    std::size_t hit_pixels = 0;
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
        running = update_map(running, build_map(std::span(&v.frames[i], 1), std::span(&v.poses[i], 1), v.k, spec));
        CHECK(running.count() >= previous);
        previous = running.count();
        hit_pixels += static_cast<std::size_t>(std::count_if(v.frames[i].depth.begin(), v.frames[i].depth.end(),
                                                             [](float d) { return d > 0.0f; }));
    }
    CHECK(running == batch);
    CHECK(batch.count() <= hit_pixels);
}

TEST_CASE("min_hits drops sparsely observed cells") {
    const Views v = collect(4);
    const GridSpec spec = GridSpec::desk();
    const FeatureGrid all = build_map(v.frames, v.poses, v.k, spec);
    BuildOptions strict;
    strict.min_hits = 5;
    const FeatureGrid dense = build_map(v.frames, v.poses, v.k, spec, strict);
    CHECK(dense.count() < all.count());
    for (const CellIndex& idx : dense.sorted_indices()) {
        REQUIRE(all.contains(idx));
        CHECK(std::equal(dense.find(idx)->begin(), dense.find(idx)->end(), all.find(idx)->begin()));
    }
}

TEST_CASE("merge treats signed zeros symmetrically") {
    GridSpec spec;
    spec.feature_dim = 1;
    FeatureGrid a(spec), b(spec);
    const float pos = 0.0f, neg = -0.0f;
    a.merge_max({0, 0, 0}, std::span(&pos, 1));
    b.merge_max({0, 0, 0}, std::span(&neg, 1));
    CHECK_FALSE(a == b);
    CHECK(update_map(a, b) == update_map(b, a));
    CHECK(!std::signbit((*update_map(b, a).find({0, 0, 0}))[0]));
}

TEST_CASE("erase keeps the remaining cells intact") {
    GridSpec spec;
    spec.feature_dim = 2;
    FeatureGrid g(spec);
    for (int i = 0; i < 5; ++i) {
        const float f[2] = {static_cast<float>(i), static_cast<float>(-i)};
        g.merge_max({i, 0, 0}, f);
    }
    g.erase({1, 0, 0});
    g.erase({9, 0, 0});
    CHECK(g.count() == 4);
    CHECK_FALSE(g.contains({1, 0, 0}));
    for (int i : {0, 2, 3, 4}) CHECK((*g.find({i, 0, 0}))[0] == static_cast<float>(i));
}

TEST_CASE("position embedding") {
    const auto zero = position_embedding({0, 0, 0}, 48);
    REQUIRE(zero.size() == 48);
    for (std::size_t i = 0; i < 48; ++i) CHECK(zero[i] == (i % 2 == 0 ? 0.0 : 1.0));
    CHECK_THROWS_AS(position_embedding({0, 0, 0}, 50), std::invalid_argument);

    // hand value: axis y block starts at 16, pair k=1 uses frequency 10000^(-6/48)
    const auto e = position_embedding({0, 3, 0}, 48);
    CHECK(std::abs(e[18] - std::sin(3.0 * std::pow(10000.0, -6.0 / 48))) < 1e-15);

    Rng rng(6);
    std::vector<std::vector<double>> seen;
    std::vector<CellIndex> indices;
    for (int i = 0; i < 200; ++i) {
        const CellIndex idx{static_cast<int>(rng.below(256)), static_cast<int>(rng.below(32)), static_cast<int>(rng.below(256))};
        if (std::find(indices.begin(), indices.end(), idx) != indices.end()) continue;
        indices.push_back(idx);
        seen.push_back(position_embedding(idx, 48));
        for (double v : seen.back()) CHECK(std::abs(v) <= 1.0);
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        for (std::size_t j = i + 1; j < seen.size(); ++j) REQUIRE(seen[i] != seen[j]);
}

TEST_CASE("occupied tokens") {
    GridSpec spec;
    CHECK(occupied_tokens(FeatureGrid(spec), 48).tokens.rows() == 0);

    const std::vector<CellIndex> cells{{5, 1, 2}, {0, 3, 9}, {5, 0, 7}};
    FeatureGrid forward(spec), backward(spec);
    std::vector<float> f(12);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::fill(f.begin(), f.end(), static_cast<float>(i + 1));
        forward.merge_max(cells[i], f);
    }
    for (std::size_t i = cells.size(); i-- > 0;) {
        std::fill(f.begin(), f.end(), static_cast<float>(i + 1));
        backward.merge_max(cells[i], f);
    }
    const MemoryTokens a = occupied_tokens(forward, 48), b = occupied_tokens(backward, 48);
    CHECK(a.tokens.rows() == 3);
    CHECK(a.tokens.cols() == 60);
    CHECK(a.indices == std::vector<CellIndex>{{0, 3, 9}, {5, 0, 7}, {5, 1, 2}});
    CHECK(a.indices == b.indices);
    CHECK(a.tokens == b.tokens);
    CHECK(a.tokens(0, 0) == 2.0);  // feature of {0,3,9}
    const auto pe = position_embedding({0, 3, 9}, 48);
    for (int k = 0; k < 48; ++k) CHECK(a.tokens(0, 12 + k) == pe[static_cast<std::size_t>(k)]);
    CHECK_THROWS_AS(occupied_tokens(forward, 10), std::invalid_argument);
}

TEST_CASE("temporal padding rule") {
    CHECK(temporal_padding(9, 4) == 3);
    CHECK(temporal_padding(1, 4) == 3);
    CHECK(temporal_padding(5, 4) == 3);
    CHECK(temporal_padding(8, 4) == 0);
    CHECK(temporal_padding(6, 4) == 2);
    CHECK(temporal_padding(7, 4) == 1);
    CHECK(temporal_padding(3, 1) == 0);
}

TEST_CASE("compress_camera shapes and values") {
    Rng rng(12);
    std::vector<PluckerImage> frames;
    for (int t = 0; t < 9; ++t) frames.push_back(random_plucker(rng, 32, 16));
    const CameraLatent z = compress_camera(frames, 8, 4);
    CHECK(z.frames == 3);
    CHECK(z.height == 2);
    CHECK(z.width == 4);
    CHECK(z.channels == 24);
    CHECK(z.data.size() == 3u * 2 * 4 * 24);

    // oracle: padded sequence [f0, f0, f0, f0, f1, ..., f8], group j -> channel block j
    for (int t = 0; t < 3; ++t)
        for (int j = 0; j < 4; ++j) {
            const int src = std::max(0, 4 * t + j - 3);
            for (int y = 0; y < 2; ++y)
                for (int x = 0; x < 4; ++x)
                    for (int c = 0; c < 6; ++c) {
                        double sum = 0.0;
                        for (int dy = 0; dy < 8; ++dy)
                            for (int dx = 0; dx < 8; ++dx) sum += frames[static_cast<std::size_t>(src)].at(x * 8 + dx, y * 8 + dy, c);
                        REQUIRE(std::abs(z.at(t, y, x, j * 6 + c) - sum / 64.0) < 1e-12);
                    }
        }

    PluckerImage constant;
    constant.width = constant.height = 8;
    constant.data.assign(8 * 8 * 6, 0.375);
    const CameraLatent one = compress_camera(std::span(&constant, 1), 8, 4);
    CHECK(one.frames == 1);
    CHECK(one.height == 1);
    CHECK(one.width == 1);
    CHECK(one.channels == 24);
    for (double v : one.data) CHECK(v == 0.375);

    std::vector<PluckerImage> uneven{random_plucker(rng, 12, 8)};
    CHECK_THROWS_AS(compress_camera(uneven, 8, 4), std::invalid_argument);
}
