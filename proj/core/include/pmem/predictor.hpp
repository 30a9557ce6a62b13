#pragma once

#include "pmem/frame.hpp"
#include "pmem/geometry.hpp"
#include "pmem/memory_map.hpp"
#include "pmem/scene_sim.hpp"

#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace pmem {

struct RgbdVideo {
    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> poses;

    std::size_t size() const { return frames.size(); }
    void append(const RgbdVideo& other);
};

/// Agent pose, persistent memory and the latest observation.
struct WorldState {
    CameraPose pose;
    FeatureGrid map;
    RgbdFrame last_obs;
};

/// World model p(o_{t+1..t+H} | o_t, a_t, M): one frame per action at the
/// poses given by compose_chunk. Implementations are deterministic.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual RgbdVideo predict(const WorldState& state, std::span<const Action> chunk,
                              const CameraIntrinsics& K) const = 0;
    virtual std::string name() const = 0;
};

/// Ground truth: renders the scene at each composed pose.
class OraclePredictor final : public Predictor {
public:
    explicit OraclePredictor(const Scene& scene) : scene_(scene) {}
    RgbdVideo predict(const WorldState& state, std::span<const Action> chunk,
                      const CameraIntrinsics& K) const override;
    std::string name() const override { return "oracle"; }

private:
    const Scene& scene_;
};

enum class FillRule { Constant, NearestToken };

struct MapRenderOptions {
    FillRule fill = FillRule::Constant;
    float fill_gray = 0.5f;
    /// NearestToken: half-angle of the search cone around each empty ray.
    double cone_angle = 5.0 * std::numbers::pi / 180.0;
    double max_range = 20.0;
    /// false: condition only on the latest observation (a map rebuilt from
    /// last_obs on every call) instead of the persistent memory.
    bool use_memory = true;
    BuildOptions build;
};

/// Marches each pixel ray through the grid cell by cell (3D DDA). The first
/// occupied cell gives depth = ray entry depth and rgb = decode_color of its
/// feature. The cell containing the camera is treated as empty.
RgbdFrame render_from_map(const FeatureGrid& map, const CameraPose& pose, const CameraIntrinsics& K,
                          const MapRenderOptions& options = {});

RgbdVideo map_render_predict(const WorldState& state, std::span<const Action> chunk, const CameraIntrinsics& K,
                             const MapRenderOptions& options = {});

class MapRenderPredictor final : public Predictor {
public:
    explicit MapRenderPredictor(MapRenderOptions options = {}) : options_(options) {}
    RgbdVideo predict(const WorldState& state, std::span<const Action> chunk,
                      const CameraIntrinsics& K) const override;
    std::string name() const override { return options_.use_memory ? "maprender" : "maprender-memoryless"; }
    const MapRenderOptions& options() const { return options_; }

private:
    MapRenderOptions options_;
};

/// Next chunk to execute given the current state and the number of frames
/// still to generate.
using Policy = std::function<ActionChunk(const WorldState& state, std::size_t remaining)>;

struct RolloutOptions {
    std::size_t chunk_size = 8;
    bool update_map = true;
    BuildOptions build;
};

struct RolloutResult {
    RgbdVideo video;
    WorldState state;
    std::vector<std::size_t> occupancy;  // occupied cells after each chunk
};

/// Predict a chunk, build a map from the predicted RGB-D, merge it into the
/// running map and advance; repeats until `steps` frames exist.
RolloutResult rollout(const Predictor& predictor, WorldState state, const Policy& policy, std::size_t steps,
                      const CameraIntrinsics& K, const RolloutOptions& options = {});
/// Executes a fixed action list split into chunks of options.chunk_size.
RolloutResult rollout(const Predictor& predictor, WorldState state, std::span<const Action> actions,
                      const CameraIntrinsics& K, const RolloutOptions& options = {});

WorldState init_map_few_shot(std::span<const RgbdFrame> frames, std::span<const CameraPose> poses,
                             const CameraIntrinsics& K, const GridSpec& spec, const BuildOptions& options = {});

}  // namespace pmem
