#include "config.hpp"

#include "pmem/errors.hpp"
#include "pmem/io.hpp"

#include <json.hpp>

#include <cctype>
#include <numbers>
#include <sstream>

namespace pmem::cli {

using json = nlohmann::json;

CameraIntrinsics RunConfig::intrinsics() const {
    return intrinsics_from_fov(fov_deg * std::numbers::pi / 180.0, width, height);
}

ActionMagnitudes RunConfig::magnitudes() const { return {step, turn_deg * std::numbers::pi / 180.0}; }

CameraPose RunConfig::start_pose() const {
    std::stringstream ss(start);
    double v[3];
    char sep = 0;
    if (!(ss >> v[0] >> sep >> v[1] >> sep >> v[2])) throw Error("--start expects x,z,yaw");
    return CameraPose::upright(Vec3(v[0], camera_height, v[1]), v[2]);
}

SceneSpec RunConfig::scene_spec() const {
    if (scene.empty()) return random_room_spec(seed, 8.0, scene_boxes);
    return scene_spec_from_json(io::read_file(scene));
}

void apply_config_json(RunConfig& c, const std::string& text) {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error("config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "scene") c.scene = value.get<std::string>();
        else if (key == "scene_boxes") c.scene_boxes = value.get<int>();
        else if (key == "fov_deg") c.fov_deg = value.get<double>();
        else if (key == "width") c.width = value.get<int>();
        else if (key == "height") c.height = value.get<int>();
        else if (key == "grid") c.grid = value.get<std::string>();
        else if (key == "step") c.step = value.get<double>();
        else if (key == "turn_deg") c.turn_deg = value.get<double>();
        else if (key == "predictor") c.predictor = value.get<std::string>();
        else if (key == "fill") c.fill = value.get<std::string>();
        else if (key == "start") c.start = value.get<std::string>();
        else if (key == "camera_height") c.camera_height = value.get<double>();
        else if (key == "stride") c.stride = value.get<int>();
        else if (key == "out") c.out = value.get<std::string>();
        else throw Error("config: unknown key '" + key + "'");
    }
}

ActionChunk parse_chunk(const std::string& text, const ActionMagnitudes& magnitudes) {
    ActionChunk chunk;
    for (char ch : text) {
        switch (std::toupper(static_cast<unsigned char>(ch))) {
            case 'F': chunk.push_back(magnitudes.make(ActionKind::MoveForward)); break;
            case 'B': chunk.push_back(magnitudes.make(ActionKind::MoveBackward)); break;
            case 'L': chunk.push_back(magnitudes.make(ActionKind::TurnLeft)); break;
            case 'R': chunk.push_back(magnitudes.make(ActionKind::TurnRight)); break;
            case ',':
            case ' ': break;
            default: throw Error(std::string("unknown action letter '") + ch + "'");
        }
    }
    if (chunk.empty()) throw Error("empty action chunk");
    return chunk;
}

GridSpec grid_spec(const std::string& name, int feature_dim) {
    GridSpec spec;
    if (name == "desk") spec = GridSpec::desk();
    else if (name == "full") spec = GridSpec::full_scale();
    else throw Error("unknown grid '" + name + "' (desk or full)");
    spec.feature_dim = feature_dim;
    return spec;
}

}  // namespace pmem::cli
