#pragma once

#include "pmem/geometry.hpp"
#include "pmem/memory_map.hpp"
#include "pmem/planner.hpp"
#include "pmem/scene_sim.hpp"

#include <cstdint>
#include <string>

namespace pmem::cli {

/// Settings shared by all commands. Loaded from --config JSON first, then
/// overridden by flags given on the command line.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string scene;       // scene spec JSON; empty = random room from seed
    int scene_boxes = 4;
    double fov_deg = 90.0;
    int width = 64;
    int height = 64;
    std::string grid = "desk";  // desk | full
    double step = 0.25;
    double turn_deg = 30.0;
    std::string predictor = "maprender";  // oracle | maprender | memoryless
    std::string fill = "constant";        // constant | nearest
    std::string start = "4,4,0";          // x,z,yaw(rad) at camera height
    double camera_height = 0.6;
    int stride = 1;
    std::string out;

    CameraIntrinsics intrinsics() const;
    ActionMagnitudes magnitudes() const;
    CameraPose start_pose() const;
    SceneSpec scene_spec() const;
};

/// Applies known keys of a JSON object; unknown keys are an error.
void apply_config_json(RunConfig& config, const std::string& json_text);

/// "F,F,L" or "FFL": F/B/L/R letters, commas optional.
ActionChunk parse_chunk(const std::string& text, const ActionMagnitudes& magnitudes);

GridSpec grid_spec(const std::string& name, int feature_dim);

}  // namespace pmem::cli
