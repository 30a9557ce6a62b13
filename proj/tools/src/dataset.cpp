#include "dataset.hpp"

#include "pmem/errors.hpp"
#include "pmem/io.hpp"

#include <json.hpp>

#include <cstdio>

namespace pmem::cli {

namespace {

std::string frame_name(std::size_t i, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu.%s", i, ext);
    return buf;
}

}  // namespace

void write_video(const fs::path& dir, const RgbdVideo& video) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < video.size(); ++i)
        io::write_frame(dir / frame_name(i, "ppm"), dir / frame_name(i, "pfm"), video.frames[i]);
    io::write_file_atomic(dir / "poses.json", io::poses_to_json(video.poses));
}

RgbdVideo read_video(const fs::path& dir) {
    RgbdVideo video;
    video.poses = io::poses_from_json(io::read_file(dir / "poses.json"));
    for (std::size_t i = 0; i < video.poses.size(); ++i)
        video.frames.push_back(io::read_frame(dir / frame_name(i, "ppm"), dir / frame_name(i, "pfm")));
    return video;
}

Dataset read_dataset(const fs::path& dir) {
    const auto manifest = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
    Dataset data;
    const auto& cam = manifest.at("camera");
    data.K = CameraIntrinsics{cam.at("fx").get<double>(), cam.at("fy").get<double>(), cam.at("cx").get<double>(),
                              cam.at("cy").get<double>(), cam.at("width").get<int>(), cam.at("height").get<int>()};
    for (const auto& entry : manifest.at("trajectories")) {
        DatasetTrajectory t;
        t.dir = dir / entry.at("dir").get<std::string>();
        const std::vector<CameraPose> poses = io::poses_from_json(io::read_file(t.dir / "poses.json"));
        const auto steps = entry.at("frame_steps").get<std::vector<std::size_t>>();
        for (std::size_t i = 0; i < steps.size(); ++i) {
            if (steps[i] >= poses.size()) throw Error((t.dir / "poses.json").string() + ": frame step out of range");
            t.frames.push_back(io::read_frame(t.dir / frame_name(i, "ppm"), t.dir / frame_name(i, "pfm")));
            t.frame_poses.push_back(poses[steps[i]]);
        }
        data.trajectories.push_back(std::move(t));
    }
    return data;
}

}  // namespace pmem::cli
