#include <doctest.h>

#include "pmem/predictor.hpp"
#include "pmem/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace pmem;
using std::numbers::pi;

namespace {

const CameraIntrinsics kK = intrinsics_from_fov(pi / 2, 64, 64);

Scene room(std::uint64_t seed) { return build_scene(random_room_spec(seed, 8.0, 5)); }

WorldState state_at(const Scene& scene, const CameraPose& pose) {
    return WorldState{pose, FeatureGrid(GridSpec::desk()), render(scene, pose, kK)};
}

Vec3 K_dir(int u, int v) { return kK.ray(u + 0.5, v + 0.5); }

ActionChunk random_chunk(Rng& rng, std::size_t n) {
    const ActionMagnitudes mag;
    ActionChunk c;
    // turns only, so the agent never leaves the room
    for (std::size_t i = 0; i < n; ++i) c.push_back(mag.make(rng.uniform() < 0.5 ? ActionKind::TurnLeft : ActionKind::TurnRight));
    return c;
}

}  // namespace

TEST_CASE("oracle predictor renders the composed poses") {
    const Scene scene = room(1);
    const OraclePredictor oracle(scene);
    const WorldState s = state_at(scene, CameraPose::upright(Vec3(4, 0.6, 4), 0.3));
    const ActionChunk one{{ActionKind::MoveForward, 0.25}};
    const RgbdVideo v1 = oracle.predict(s, one, kK);
    CHECK(v1.size() == 1);

    Rng rng(1);
    const ActionChunk chunk = random_chunk(rng, 6);
    const RgbdVideo v = oracle.predict(s, chunk, kK);
    const auto poses = compose_chunk(s.pose, chunk);
    REQUIRE(v.size() == 6);
    CHECK(v.poses == poses);
    for (std::size_t i = 0; i < poses.size(); ++i) CHECK(v.frames[i] == render(scene, poses[i], kK));

    const MapRenderPredictor mr;
    CHECK(mr.predict(s, chunk, kK).poses == poses);
}

TEST_CASE("empty map renders constant gray") {
    const MapRenderPredictor mr;
    WorldState s;
    s.pose = CameraPose::upright(Vec3(4, 0.6, 4), 0.0);
    s.last_obs = RgbdFrame(64, 64);
    const ActionChunk chunk{{ActionKind::TurnLeft, 0.5}, {ActionKind::MoveForward, 0.25}};
    for (const RgbdFrame& f : mr.predict(s, chunk, kK).frames) {
        for (float c : f.rgb) REQUIRE(c == 0.5f);
        for (float d : f.depth) REQUIRE(d == 0.0f);
    }
}

TEST_CASE("cells behind the camera are never hit") {
    WorldState s;
    s.pose = CameraPose::upright(Vec3(4, 0.6, 4), 0.0);  // looking towards +z
    std::vector<float> f(12, 0.9f);
    for (int ix = 20; ix < 40; ++ix)
        for (int iy = 0; iy < 8; ++iy)
            for (int iz = 16; iz < 31; ++iz) s.map.merge_max({ix, iy, iz}, f);  // z in [0, 3.75]
    const RgbdFrame with = render_from_map(s.map, s.pose, kK);
    const RgbdFrame without = render_from_map(FeatureGrid(GridSpec::desk()), s.pose, kK);
    CHECK(with == without);
}

TEST_CASE("a map rendered from its source pose reproduces the frame") {
    const double diag = std::sqrt(0.25 * 0.25 * 2 + 1.0);
    double worst_depth = 0.0, mean_rgb = 0.0, worst_rgb = 0.0;
    std::size_t counted = 0, within = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Scene scene = room(seed);
        const CameraPose pose = CameraPose::upright(Vec3(4, 0.6, 4), 0.7 * static_cast<double>(seed));
        const RgbdFrame truth = render(scene, pose, kK);
        const FeatureGrid map = build_map(std::span(&truth, 1), std::span(&pose, 1), kK, GridSpec::desk());
        const RgbdFrame pred = render_from_map(map, pose, kK);
        for (int v = 0; v < 64; ++v)
            for (int u = 0; u < 64; ++u) {
                if (pred.depth_at(u, v) <= 0.0f || truth.depth_at(u, v) <= 0.0f) continue;
                const auto own = map.spec().cell_of(unproject(u + 0.5, v + 0.5, truth.depth_at(u, v), kK, pose));
                const auto hit = map.spec().cell_of(unproject(u + 0.5, v + 0.5, pred.depth_at(u, v) + 1e-6, kK, pose));
                if (!own || !hit || *own != *hit) continue;
                worst_depth = std::max(worst_depth, static_cast<double>(std::abs(pred.depth_at(u, v) - truth.depth_at(u, v))));
                double err = 0.0;
                for (int c = 0; c < 3; ++c) err = std::max(err, static_cast<double>(std::abs(pred.color(u, v, c) - truth.color(u, v, c))));
                worst_rgb = std::max(worst_rgb, err);
                mean_rgb += err;
                within += err <= 0.15;
                ++counted;
            }
    }
    mean_rgb /= static_cast<double>(counted);
    MESSAGE("own-cell pixels " << counted << ", rgb within 0.15: " << static_cast<double>(within) / counted);
    CHECK(counted > 1000);
    CHECK(worst_depth <= diag);
    CHECK(worst_rgb <= 1.0);
    CHECK(mean_rgb <= 0.15);
}

TEST_CASE("a frozen map renders identically on revisit") {
    const Scene scene = room(2);
    WorldState s = state_at(scene, CameraPose::upright(Vec3(4, 0.6, 4), 0.0));
    s.map = build_map(std::span(&s.last_obs, 1), std::span(&s.pose, 1), kK, GridSpec::desk());
    const MapRenderPredictor mr;
    const RgbdFrame before = render_from_map(s.map, s.pose, kK);

    // wander elsewhere without updating the map, then come back
    WorldState away = s;
    const ActionMagnitudes mag;
    const ActionChunk wander{mag.make(ActionKind::TurnLeft), mag.make(ActionKind::TurnLeft), mag.make(ActionKind::MoveForward)};
    RolloutOptions frozen;
    frozen.update_map = false;
    away = rollout(mr, away, std::span<const Action>(wander), kK, frozen).state;
    away.pose = s.pose;
    CHECK(render_from_map(away.map, away.pose, kK) == before);
    CHECK(away.map == s.map);
}

TEST_CASE("oracle rollout accumulates the map of its own frames") {
    const Scene scene = room(3);
    const OraclePredictor oracle(scene);
    WorldState s = state_at(scene, CameraPose::upright(Vec3(4, 0.6, 4), 0.0));
    Rng rng(3);
    const ActionChunk actions = random_chunk(rng, 112);
    const RolloutResult r = rollout(oracle, s, std::span<const Action>(actions), kK);
    REQUIRE(r.video.size() == 112);
    CHECK(r.occupancy.size() == 14);
    CHECK(std::is_sorted(r.occupancy.begin(), r.occupancy.end()));
    const FeatureGrid expect = build_map(r.video.frames, r.video.poses, kK, GridSpec::desk());
    CHECK(r.state.map == expect);
    CHECK(r.state.pose == r.video.poses.back());
    CHECK(r.state.last_obs == r.video.frames.back());

    const ActionChunk one(actions.begin(), actions.begin() + 1);
    const RolloutResult single = rollout(oracle, s, std::span<const Action>(one), kK);
    const RgbdVideo direct = oracle.predict(s, one, kK);
    CHECK(single.video.frames == direct.frames);
    CHECK(single.video.poses == direct.poses);

    CHECK_THROWS_AS(rollout(oracle, s, [](const WorldState&, std::size_t) { return ActionChunk{}; }, 4, kK),
                    std::invalid_argument);
    CHECK_THROWS_AS(rollout(oracle, s, [](const WorldState&, std::size_t) { return ActionChunk{}; }, 0, kK),
                    std::invalid_argument);
}

TEST_CASE("few-shot initialization") {
    const Scene scene = room(4);
    std::vector<CameraPose> poses;
    std::vector<RgbdFrame> frames;
    for (int i = 0; i < 4; ++i) {
        poses.push_back(CameraPose::upright(Vec3(4, 0.6, 4), 0.4 * i));
        frames.push_back(render(scene, poses.back(), kK));
    }
    const WorldState s = init_map_few_shot(frames, poses, kK, GridSpec::desk());
    CHECK(s.map == build_map(frames, poses, kK, GridSpec::desk()));
    CHECK(s.pose == poses.back());
    CHECK(s.last_obs == frames.back());

    const WorldState one = init_map_few_shot(std::span(frames.data(), 1), std::span(poses.data(), 1), kK, GridSpec::desk());
    CHECK(one.map.count() > 0);
    CHECK_THROWS_AS(init_map_few_shot({}, {}, kK, GridSpec::desk()), std::invalid_argument);

    // held-out pose between the shots
    const CameraPose held = CameraPose::upright(Vec3(4, 0.6, 4), 0.6);
    const RgbdFrame truth = render(scene, held, kK);
    const RgbdFrame pred = render_from_map(s.map, held, kK);
    double err = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < 64; ++v)
        for (int u = 0; u < 64; ++u) {
            if (pred.depth_at(u, v) <= 0.0f) continue;
            for (int c = 0; c < 3; ++c) err += std::abs(pred.color(u, v, c) - truth.color(u, v, c));
            n += 3;
        }
    REQUIRE(n > 0);
    MESSAGE("held-out mean abs rgb error " << err / n);
    CHECK(err / n < 0.2);
}

TEST_CASE("rendered depth stays within range") {
    const Scene scene = room(5);
    const CameraPose pose = CameraPose::upright(Vec3(4, 0.6, 4), 1.0);
    const RgbdFrame truth = render(scene, pose, kK);
    const FeatureGrid map = build_map(std::span(&truth, 1), std::span(&pose, 1), kK, GridSpec::desk());
    MapRenderOptions opts;
    for (double range : {20.0, 2.0}) {
        opts.max_range = range;
        const RgbdFrame f = render_from_map(map, CameraPose::upright(Vec3(4, 0.6, 4), 1.3), kK, opts);
        for (float d : f.depth) {
            REQUIRE(d >= 0.0f);
            REQUIRE(d <= range + 1e-6);
        }
    }
}

TEST_CASE("nearest-token fill colors rays near an isolated token") {
    FeatureGrid map(GridSpec::desk());
    const CellIndex cell{16, 1, 56};  // centre (0.125, 0.6, 10.125)
    const Vec3 centre = map.spec().cell_center(cell);
    std::vector<float> f(12, 0.0f);
    f[0] = 1.0f;  // red
    map.merge_max(cell, f);
    const CameraPose pose = CameraPose::upright(Vec3(centre.x(), centre.y(), 0.0), 0.0);
    MapRenderOptions opts;
    opts.max_range = 20.0;
    const RgbdFrame constant = render_from_map(map, pose, kK, opts);
    opts.fill = FillRule::NearestToken;
    const RgbdFrame cone = render_from_map(map, pose, kK, opts);

    int red_constant = 0, red_cone = 0;
    for (int v = 0; v < 64; ++v)
        for (int u = 0; u < 64; ++u) {
            const Vec3 dir = K_dir(u, v);
            const double angle = std::acos(dir.normalized().dot((centre - pose.translation).normalized()));
            const bool hit = constant.depth_at(u, v) > 0.0f;
            red_constant += constant.color(u, v, 0) == 1.0f;
            red_cone += cone.color(u, v, 0) == 1.0f;
            if (hit) continue;
            CHECK(cone.depth_at(u, v) == 0.0f);
            if (angle < opts.cone_angle - 1e-9) CHECK(cone.color(u, v, 0) == 1.0f);
            if (angle > opts.cone_angle + 1e-9) CHECK(cone.color(u, v, 0) == 0.5f);
        }
    CHECK(red_cone > red_constant);
}
