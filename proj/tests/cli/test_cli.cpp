#include <doctest.h>

#include "pmem_cli/cli.hpp"

#include "pmem/io.hpp"
#include "pmem/predictor.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace pmem;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result pmem_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pmem_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp_tree(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const fs::path& f : files) all += fs::relative(f, dir).string() + "\n" + io::read_file(f);
    return all;
}

std::vector<RgbdFrame> all_frames(const fs::path& ds, std::vector<CameraPose>& poses) {
    const auto manifest = nlohmann::json::parse(io::read_file(ds / "manifest.json"));
    std::vector<RgbdFrame> frames;
    for (const auto& t : manifest["trajectories"]) {
        const fs::path dir = ds / t["dir"].get<std::string>();
        const auto traj_poses = io::poses_from_json(io::read_file(dir / "poses.json"));
        std::size_t i = 0;
        for (std::size_t step : t["frame_steps"].get<std::vector<std::size_t>>()) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%04zu", i++);
            frames.push_back(io::read_frame(dir / (std::string(name) + ".ppm"), dir / (std::string(name) + ".pfm")));
            poses.push_back(traj_poses[step]);
        }
    }
    return frames;
}

const CameraIntrinsics kK = intrinsics_from_fov(std::numbers::pi / 2, 64, 64);

}  // namespace

TEST_CASE("collect is deterministic and honours the stride") {
    const fs::path dir = workdir("collect");
    REQUIRE(pmem_run({"collect", "--out", (dir / "a").string(), "--n", "3", "--seed", "7", "--stride", "3"}).code == 0);
    REQUIRE(pmem_run({"--seed", "7", "collect", "--out", (dir / "b").string(), "--n", "3", "--stride", "3"}).code == 0);
    CHECK(slurp_tree(dir / "a") == slurp_tree(dir / "b"));

    const auto manifest = nlohmann::json::parse(io::read_file(dir / "a" / "manifest.json"));
    CHECK(manifest["stride"] == 3);
    CHECK(manifest["trajectories"].size() == 3);
    for (const auto& t : manifest["trajectories"]) {
        const std::size_t actions = t["actions"];
        CHECK(actions <= 500);
        CHECK(t["frames"].get<std::size_t>() == actions / 3 + 1);
        for (std::size_t s : t["frame_steps"].get<std::vector<std::size_t>>()) CHECK(s % 3 == 0);
    }
    CHECK(pmem_run({"collect", "--out", (dir / "c").string(), "--max-steps", "900"}).code == 1);
}

TEST_CASE("build-map round trips and updates incrementally") {
    const fs::path dir = workdir("build");
    REQUIRE(pmem_run({"collect", "--out", (dir / "a").string(), "--n", "2", "--seed", "1"}).code == 0);
    const std::string scene = (dir / "a" / "scene.json").string();
    REQUIRE(pmem_run({"collect", "--out", (dir / "b").string(), "--n", "2", "--seed", "2", "--scene", scene}).code == 0);

    const Result ra = pmem_run({"build-map", "--data", (dir / "a").string(), "--out", (dir / "a.pmap").string()});
    REQUIRE(ra.code == 0);
    CHECK(ra.out.rfind("occupied ", 0) == 0);
    std::vector<CameraPose> pa;
    const auto fa = all_frames(dir / "a", pa);
    const FeatureGrid direct = build_map(fa, pa, kK, GridSpec::desk());
    CHECK(io::decode_map(io::read_file(dir / "a.pmap")) == direct);

    REQUIRE(pmem_run({"build-map", "--data", (dir / "b").string(), "--base", (dir / "a.pmap").string(), "--out",
                      (dir / "ab.pmap").string()})
                .code == 0);
    std::vector<CameraPose> pb;
    auto fb = all_frames(dir / "b", pb);
    std::vector<RgbdFrame> frames = fa;
    frames.insert(frames.end(), fb.begin(), fb.end());
    std::vector<CameraPose> poses = pa;
    poses.insert(poses.end(), pb.begin(), pb.end());
    CHECK(io::decode_map(io::read_file(dir / "ab.pmap")) == build_map(frames, poses, kK, GridSpec::desk()));

    REQUIRE(pmem_run({"--grid", "full", "build-map", "--data", (dir / "a").string(), "--out", (dir / "p.pmap").string()}).code == 0);
    CHECK(io::decode_map(io::read_file(dir / "p.pmap")).spec().dims == std::array<int, 3>{256, 32, 256});
}

TEST_CASE("build-map ingests external features") {
    const fs::path dir = workdir("ingest");
    REQUIRE(pmem_run({"collect", "--out", (dir / "a").string(), "--n", "1", "--seed", "4"}).code == 0);
    std::vector<CameraPose> poses;
    const auto frames = all_frames(dir / "a", poses);
    fs::create_directories(dir / "feat" / "traj_000");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.pten", i);
        io::write_file_atomic(dir / "feat" / "traj_000" / name, io::encode_tensor(io::tensor_from_features(extract_features(frames[i]))));
    }
    REQUIRE(pmem_run({"build-map", "--data", (dir / "a").string(), "--ingest-features", (dir / "feat").string(), "--out",
                      (dir / "f.pmap").string()})
                .code == 0);
    CHECK(io::decode_map(io::read_file(dir / "f.pmap")) == build_map(frames, poses, kK, GridSpec::desk()));

    io::write_file_atomic(dir / "a" / "traj_000" / "frame_0001.pfm", "broken");
    const Result bad = pmem_run({"build-map", "--data", (dir / "a").string(), "--out", (dir / "g.pmap").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("frame_0001.pfm") != std::string::npos);
}

TEST_CASE("predict and revisit") {
    const fs::path dir = workdir("predict");
    REQUIRE(pmem_run({"--seed", "5", "--predictor", "oracle", "predict", "--chunk", "FFL", "--out", (dir / "v").string()}).code == 0);
    const auto poses = io::poses_from_json(io::read_file(dir / "v" / "poses.json"));
    REQUIRE(poses.size() == 3);
    const Scene scene = build_scene(random_room_spec(5, 8.0, 4));
    // ppm quantizes colour, so compare depth bitwise and colour to 8 bits
    const RgbdFrame f = io::read_frame(dir / "v" / "frame_0002.ppm", dir / "v" / "frame_0002.pfm");
    const RgbdFrame truth = render(scene, poses[2], kK);
    CHECK(f.depth == truth.depth);
    CHECK(io::encode_ppm(f) == io::encode_ppm(truth));

    const Result r = pmem_run({"--seed", "5", "predict", "--revisit", "6"});
    CHECK(r.out == "predictor maprender revisited 5 src 100.000000\n");
    const Result m = pmem_run({"--seed", "5", "--predictor", "memoryless", "predict", "--revisit", "6"});
    CHECK(m.code == 0);
    CHECK(m.out.find("src 100.000000") == std::string::npos);
}

TEST_CASE("rollout reports monotone occupancy over 112 steps") {
    const Result r = pmem_run({"--predictor", "oracle", "rollout", "--steps", "112"});
    CHECK(r.code == 0);
    CHECK(r.out.find("frames 112 monotone yes") != std::string::npos);
    CHECK(r.out.find("revisited 12 src 100.000000") != std::string::npos);
}

TEST_CASE("plan modes") {
    const fs::path dir = workdir("plan");
    const Result rank = pmem_run({"--predictor", "oracle", "--out", (dir / "r").string(), "plan", "--mode", "rank", "--n", "16"});
    CHECK(rank.code == 0);
    CHECK(rank.out.rfind("evaluated 16\n", 0) == 0);
    const std::string table = io::read_file(dir / "r" / "ranking.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 17);

    const Result cem = pmem_run({"--predictor", "oracle", "--out", (dir / "c").string(), "plan", "--mode", "cem", "--iters", "5"});
    CHECK(cem.code == 0);
    CHECK(cem.out.rfind("samples 60 elites 18 iterations 5\n", 0) == 0);
    std::istringstream trace(io::read_file(dir / "c" / "trace.csv"));
    std::string line;
    std::getline(trace, line);
    CHECK(line == "iteration,best_cost,mean_elite_cost");
    double prev = 1e300;
    int rows = 0;
    while (std::getline(trace, line)) {
        const double best = std::stod(line.substr(line.find(',') + 1));
        CHECK(best <= prev);
        prev = best;
        ++rows;
    }
    CHECK(rows == 5);
    CHECK(io::actions_from_json(io::read_file(dir / "c" / "best.json")).size() == 6);
}

TEST_CASE("check-block exit codes") {
    const Result ok = pmem_run({"check-block", "--instances", "3"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    CHECK(ok.out.find("max_rel_gradient_error") != std::string::npos);
    const Result bad = pmem_run({"check-block", "--instances", "3", "--inject-gradient-error"});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL gradients_match_finite_differences") != std::string::npos);
}

TEST_CASE("eval csv golden output") {
    const fs::path dir = workdir("eval");
    REQUIRE(pmem_run({"--predictor", "oracle", "--out", (dir / "gt").string(), "predict", "--chunk", "FL"}).code == 0);
    const Result same = pmem_run({"eval", "--pred", (dir / "gt").string(), "--gt", (dir / "gt").string()});
    CHECK(same.code == 0);
    CHECK(same.out ==
          "metric,value,n_items\n"
          "psnr[0],99,1\n"
          "psnr[1],99,1\n"
          "ssim[0],1,1\n"
          "ssim[1],1,1\n"
          "psnr,99,2\n"
          "ssim,1,2\n"
          "src,100,2\n");

    fs::create_directories(dir / "runs");
    for (int k = 0; k < 3; ++k) fs::copy(dir / "gt", dir / "runs" / ("seed_" + std::to_string(k)), fs::copy_options::recursive);
    const Result agg = pmem_run({"--out", (dir / "agg.csv").string(), "eval", "--pred", (dir / "runs").string(), "--gt",
                                 (dir / "gt").string(), "--seeds", "3"});
    CHECK(agg.code == 0);
    CHECK(io::read_file(dir / "agg.csv") ==
          "metric,mean,std,n_seeds\n"
          "psnr,99,0,3\n"
          "ssim,1,0,3\n"
          "src,100,0,3\n");

    REQUIRE(pmem_run({"--predictor", "oracle", "--out", (dir / "short").string(), "predict", "--chunk", "F"}).code == 0);
    const Result mismatch = pmem_run({"eval", "--pred", (dir / "short").string(), "--gt", (dir / "gt").string()});
    CHECK(mismatch.code == 1);
    CHECK(mismatch.err.find("frame count") != std::string::npos);
}

TEST_CASE("config file with flag overrides") {
    const fs::path dir = workdir("config");
    io::write_file_atomic(dir / "run.json", R"({"seed": 5, "predictor": "memoryless"})");
    const std::string cfg = (dir / "run.json").string();
    const Result from_file = pmem_run({"--config", cfg, "predict", "--revisit", "6"});
    CHECK(from_file.out.rfind("predictor maprender-memoryless", 0) == 0);
    const Result overridden = pmem_run({"--config", cfg, "--predictor", "maprender", "predict", "--revisit", "6"});
    CHECK(overridden.out == "predictor maprender revisited 5 src 100.000000\n");

    io::write_file_atomic(dir / "bad.json", R"({"sed": 5})");
    const Result bad = pmem_run({"--config", (dir / "bad.json").string(), "predict"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("unknown key 'sed'") != std::string::npos);

    CHECK(pmem_run({}).code != 0);
    CHECK(pmem_run({"predict", "--bogus"}).code != 0);
    CHECK(pmem_run({"--predictor", "dream", "predict"}).code == 1);
}
