#pragma once

#include "pmem/predictor.hpp"
#include "pmem/scene_sim.hpp"

#include <filesystem>
#include <vector>

namespace pmem::cli {

namespace fs = std::filesystem;

/// frame_NNNN.ppm / frame_NNNN.pfm plus poses.json, one pose per frame.
void write_video(const fs::path& dir, const RgbdVideo& video);
RgbdVideo read_video(const fs::path& dir);

struct DatasetTrajectory {
    fs::path dir;
    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> frame_poses;
};

struct Dataset {
    CameraIntrinsics K;
    std::vector<DatasetTrajectory> trajectories;
};

Dataset read_dataset(const fs::path& dir);

}  // namespace pmem::cli
