#include "pmem_cli/cli.hpp"

#include "config.hpp"
#include "dataset.hpp"

#include "pmem/block_check.hpp"
#include "pmem/errors.hpp"
#include "pmem/io.hpp"
#include "pmem/metrics.hpp"
#include "pmem/planner.hpp"
#include "pmem/predictor.hpp"
#include "pmem/protocols.hpp"
#include "pmem/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>

namespace pmem::cli {

namespace {

using json = nlohmann::json;

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string letters(const ActionChunk& chunk) {
    std::string s;
    for (const Action& a : chunk) {
        switch (a.kind) {
            case ActionKind::MoveForward: s += 'F'; break;
            case ActionKind::MoveBackward: s += 'B'; break;
            case ActionKind::TurnLeft: s += 'L'; break;
            case ActionKind::TurnRight: s += 'R'; break;
        }
    }
    return s;
}

struct Context {
    RunConfig config;
    std::ostream& out;
};

std::unique_ptr<Predictor> make_predictor(const RunConfig& c, const Scene& scene) {
    if (c.predictor == "oracle") return std::make_unique<OraclePredictor>(scene);
    MapRenderOptions opts;
    if (c.fill == "nearest") opts.fill = FillRule::NearestToken;
    else if (c.fill != "constant") throw Error("unknown fill '" + c.fill + "' (constant or nearest)");
    if (c.predictor == "memoryless") opts.use_memory = false;
    else if (c.predictor != "maprender") throw Error("unknown predictor '" + c.predictor + "'");
    return std::make_unique<MapRenderPredictor>(opts);
}

/// Ground-truth observation at the start pose; the map comes from `map_path`
/// or, when empty, from that single observation.
WorldState initial_state(const RunConfig& c, const Scene& scene, const std::string& map_path) {
    const CameraIntrinsics K = c.intrinsics();
    const CameraPose pose = c.start_pose();
    RgbdFrame obs = render(scene, pose, K);
    if (!map_path.empty()) return WorldState{pose, io::decode_map(io::read_file(map_path)), std::move(obs)};
    const GridSpec spec = grid_spec(c.grid, kHandcraftedFeatureDim);
    return init_map_few_shot(std::span(&obs, 1), std::span(&pose, 1), K, spec);
}

// collect -------------------------------------------------------------------

struct CollectArgs {
    std::size_t n = 3;
    std::size_t max_steps = kMaxTrajectoryActions;
    double turnaround = 0.5;
};

int cmd_collect(Context& ctx, const CollectArgs& a) {
    const RunConfig& c = ctx.config;
    if (c.out.empty()) throw Error("collect: --out is required");
    require(a.max_steps >= 1 && a.max_steps <= kMaxTrajectoryActions, "collect: --max-steps must be in [1, 500]");
    const SceneSpec spec = c.scene_spec();
    const Scene scene = build_scene(spec);
    const CameraIntrinsics K = c.intrinsics();
    const fs::path root(c.out);
    fs::create_directories(root);
    io::write_file_atomic(root / "scene.json", scene_spec_to_json(spec));

    CollectOptions opts;
    opts.stride = c.stride;
    opts.magnitudes = c.magnitudes();
    opts.camera_height = c.camera_height;
    opts.turnaround_prob = a.turnaround;
    opts.max_actions = a.max_steps;

    json manifest{{"seed", c.seed},
                  {"n", a.n},
                  {"stride", c.stride},
                  {"max_steps", a.max_steps},
                  {"camera", {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}}},
                  {"trajectories", json::array()}};
    for (std::size_t i = 0; i < a.n; ++i) {
        const std::uint64_t seed = mix_seed(c.seed, i);
        const Trajectory t = collect_trajectory(scene, K, seed, opts);
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03zu", i);
        RgbdVideo frames;
        frames.frames = t.frames;
        for (std::size_t s : t.frame_steps) frames.poses.push_back(t.poses[s]);
        write_video(root / name, frames);
        // poses.json holds every pose, frames map into it through frame_steps
        io::write_file_atomic(root / name / "poses.json", io::poses_to_json(t.poses));
        io::write_file_atomic(root / name / "actions.json", io::actions_to_json(t.actions));
        manifest["trajectories"].push_back({{"dir", name},
                                            {"seed", seed},
                                            {"actions", t.actions.size()},
                                            {"frames", t.frames.size()},
                                            {"stride", t.stride},
                                            {"frame_steps", t.frame_steps}});
        ctx.out << name << " actions " << t.actions.size() << " frames " << t.frames.size() << "\n";
    }
    io::write_file_atomic(root / "manifest.json", manifest.dump(1));
    return 0;
}

// build-map -----------------------------------------------------------------

struct BuildArgs {
    std::string data;
    std::string base;
    std::string ingest;
    int min_hits = 1;
};

int cmd_build_map(Context& ctx, const BuildArgs& a) {
    const RunConfig& c = ctx.config;
    if (c.out.empty()) throw Error("build-map: --out is required");
    const Dataset data = read_dataset(a.data);

    std::vector<RgbdFrame> frames;
    std::vector<CameraPose> poses;
    std::vector<FeatureMap> features;
    for (const DatasetTrajectory& t : data.trajectories) {
        for (std::size_t i = 0; i < t.frames.size(); ++i) {
            frames.push_back(t.frames[i]);
            poses.push_back(t.frame_poses[i]);
            if (a.ingest.empty()) {
                features.push_back(extract_features(t.frames[i]));
            } else {
                char name[32];
                std::snprintf(name, sizeof name, "frame_%04zu.pten", i);
                const fs::path file = fs::path(a.ingest) / t.dir.filename() / name;
                try {
                    features.push_back(io::features_from_tensor(io::decode_tensor(io::read_file(file))));
                } catch (const std::exception& e) {
                    throw Error(file.string() + ": " + e.what());
                }
            }
        }
    }
    if (frames.empty()) throw Error("build-map: dataset has no frames");
    const GridSpec spec = grid_spec(c.grid, features.front().dim);
    BuildOptions opts;
    opts.min_hits = a.min_hits;
    FeatureGrid map = build_map_from_features(frames, features, poses, data.K, spec, opts);
    if (!a.base.empty()) {
        FeatureGrid base = io::decode_map(io::read_file(a.base));
        if (!(base.spec() == spec)) throw Error("build-map: --base grid spec differs");
        base.merge_max(map);
        map = std::move(base);
    }
    io::write_file_atomic(c.out, io::encode_map(map));
    ctx.out << "occupied " << map.count() << " fill_ratio "
            << fmt("%.6g", static_cast<double>(map.count()) / static_cast<double>(spec.total_cells())) << "\n";
    return 0;
}

// predict -------------------------------------------------------------------

struct PredictArgs {
    std::string map;
    std::string chunk = "FFFFFFFF";
    std::size_t revisit = 0;
};

int cmd_predict(Context& ctx, const PredictArgs& a) {
    const RunConfig& c = ctx.config;
    const Scene scene = build_scene(c.scene_spec());
    const auto predictor = make_predictor(c, scene);
    const WorldState state = initial_state(c, scene, a.map);
    const CameraIntrinsics K = c.intrinsics();

    if (a.revisit > 0) {
        const RevisitResult r = forward_reverse_revisit(*predictor, state, a.revisit, K, c.magnitudes());
        ctx.out << "predictor " << predictor->name() << " revisited " << r.first_visit.size() << " src "
                << fmt("%.6f", r.src) << "\n";
        if (!c.out.empty()) {
            write_video(fs::path(c.out) / "first_visit", r.first_visit);
            write_video(fs::path(c.out) / "revisit", r.revisit);
        }
        return 0;
    }
    const RgbdVideo video = predictor->predict(state, parse_chunk(a.chunk, c.magnitudes()), K);
    ctx.out << "predictor " << predictor->name() << " frames " << video.size() << "\n";
    if (!c.out.empty()) write_video(c.out, video);
    return 0;
}

// rollout -------------------------------------------------------------------

struct RolloutArgs {
    std::string map;
    std::size_t steps = 112;
    std::size_t chunk_size = 8;
    std::string path = "figure-eight";
};

int cmd_rollout(Context& ctx, const RolloutArgs& a) {
    const RunConfig& c = ctx.config;
    const Scene scene = build_scene(c.scene_spec());
    const auto predictor = make_predictor(c, scene);
    const WorldState state = initial_state(c, scene, a.map);
    const CameraIntrinsics K = c.intrinsics();
    const ActionMagnitudes mag = c.magnitudes();

    ActionChunk actions;
    if (a.path == "figure-eight") {
        actions = figure_eight_actions(a.steps, mag);
    } else if (a.path == "random") {
        Rng rng(c.seed);
        for (std::size_t i = 0; i < a.steps; ++i) actions.push_back(mag.make(kAllActions[rng.below(4)]));
    } else {
        throw Error("unknown path '" + a.path + "' (figure-eight or random)");
    }

    RolloutOptions opts;
    opts.chunk_size = a.chunk_size;
    const RolloutResult r = rollout(*predictor, state, actions, K, opts);
    bool monotone = true;
    for (std::size_t i = 0; i < r.occupancy.size(); ++i) {
        ctx.out << "chunk " << i << " occupied " << r.occupancy[i] << "\n";
        if (i > 0 && r.occupancy[i] < r.occupancy[i - 1]) monotone = false;
    }
    ctx.out << "frames " << r.video.size() << " monotone " << (monotone ? "yes" : "no") << "\n";
    const auto pairs = revisited_pairs(r.video);
    if (!pairs.empty()) ctx.out << "revisited " << pairs.size() << " src " << fmt("%.6f", revisit_src(r.video).src) << "\n";
    if (!c.out.empty()) {
        write_video(c.out, r.video);
        io::write_file_atomic(fs::path(c.out) / "map.pmap", io::encode_map(r.state.map));
    }
    return monotone ? 0 : 1;
}

// plan ----------------------------------------------------------------------

struct PlanArgs {
    std::string map;
    std::string mode = "cem";
    std::size_t n = 0;
    std::size_t horizon = 6;
    std::size_t iters = 30;
    double elite = 0.30;
    std::string goal_chunk = "FFFLFF";
    std::string cost = "mse";
};

int cmd_plan(Context& ctx, const PlanArgs& a) {
    const RunConfig& c = ctx.config;
    const Scene scene = build_scene(c.scene_spec());
    const auto predictor = make_predictor(c, scene);
    const WorldState state = initial_state(c, scene, a.map);
    const CameraIntrinsics K = c.intrinsics();
    const ActionMagnitudes mag = c.magnitudes();
    const ActionChunk goal_chunk = parse_chunk(a.goal_chunk, mag);
    const std::vector<CameraPose> gt = compose_chunk(state.pose, goal_chunk);
    const RgbdFrame goal = render(scene, gt.back(), K);
    CostKind cost = CostKind::MSE;
    if (a.cost == "cosine") cost = CostKind::FeatureCosine;
    else if (a.cost != "mse") throw Error("unknown cost '" + a.cost + "' (mse or cosine)");

    ActionChunk best;
    double best_cost = 0.0;
    std::string table;
    if (a.mode == "rank") {
        const std::size_t n = a.n ? a.n : 16;
        Rng rng(c.seed);
        std::vector<ActionChunk> candidates(n);
        for (ActionChunk& cand : candidates)
            for (std::size_t t = 0; t < a.horizon; ++t) cand.push_back(mag.make(kAllActions[rng.below(4)]));
        const RankedCandidates r = rank_trajectories(*predictor, state, candidates, goal, K, cost);
        table = "rank,candidate,cost,actions\n";
        for (std::size_t i = 0; i < r.order.size(); ++i)
            table += std::to_string(i) + "," + std::to_string(r.order[i]) + "," + fmt("%.17g", r.costs[r.order[i]]) + "," +
                     letters(r.chunks[r.order[i]]) + "\n";
        best = r.best();
        best_cost = r.costs[r.order[0]];
        ctx.out << "evaluated " << r.chunks.size() << "\n";
    } else if (a.mode == "cem") {
        CemOptions opts;
        opts.horizon = a.horizon;
        opts.n_samples = a.n ? a.n : 60;
        opts.elite_frac = a.elite;
        opts.iters = a.iters;
        opts.seed = c.seed;
        opts.cost = cost;
        opts.magnitudes = mag;
        const CemResult r = cem_plan(*predictor, state, goal, K, opts);
        table = cem_trace_csv(r.trace);
        best = r.best;
        best_cost = r.best_cost;
        ctx.out << "samples " << opts.n_samples << " elites " << elite_count(opts.n_samples, opts.elite_frac)
                << " iterations " << r.trace.size() << "\n";
    } else {
        throw Error("unknown mode '" + a.mode + "' (rank or cem)");
    }

    const std::vector<CameraPose> planned = compose_chunk(state.pose, best);
    ctx.out << "best " << letters(best) << " cost " << fmt("%.6g", best_cost) << "\n";
    const double sim = sim_score(planned.back(), gt.back(), scene.diagonal());
    if (planned.size() == gt.size()) {
        ctx.out << "ate " << fmt("%.6f", ate(planned, gt)) << " rpe " << fmt("%.6f", rpe(planned, gt)) << " sim "
                << fmt("%.4f", sim) << "\n";
    } else {
        ctx.out << "sim " << fmt("%.4f", sim) << "\n";
    }
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        io::write_file_atomic(fs::path(c.out) / "best.json", io::actions_to_json(best));
        io::write_file_atomic(fs::path(c.out) / (a.mode == "rank" ? "ranking.csv" : "trace.csv"), table);
    }
    return 0;
}

// check-block ---------------------------------------------------------------

int cmd_check_block(Context& ctx, BlockCheckOptions opts) {
    opts.seed = ctx.config.seed;
    const BlockCheckReport report = run_block_checks(opts);
    for (const CheckResult& r : report.checks)
        ctx.out << (r.passed ? "PASS " : "FAIL ") << r.name << " " << fmt("%.3e", r.value) << " " << r.detail << "\n";
    ctx.out << "max_rel_gradient_error " << fmt("%.3e", report.max_gradient_error) << "\n";
    return report.passed() ? 0 : 1;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::size_t seeds = 1;
};

struct FrameScores {
    std::vector<double> psnr, ssim;
    double src = 0.0;
};

FrameScores score(const RgbdVideo& pred, const RgbdVideo& gt, const fs::path& where) {
    if (pred.size() != gt.size())
        throw Error(where.string() + ": frame count " + std::to_string(pred.size()) + " differs from ground truth " +
                    std::to_string(gt.size()));
    FrameScores s;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s.psnr.push_back(psnr(pred.frames[i], gt.frames[i]));
        s.ssim.push_back(ssim(pred.frames[i], gt.frames[i]));
    }
    s.src = src(gt, pred);
    return s;
}

int cmd_eval(Context& ctx, const EvalArgs& a) {
    const RgbdVideo gt = read_video(a.gt);
    std::string csv;
    if (a.seeds <= 1) {
        const FrameScores s = score(read_video(a.pred), gt, a.pred);
        std::vector<MetricReport> rows;
        for (std::size_t i = 0; i < s.psnr.size(); ++i) rows.push_back({"psnr[" + std::to_string(i) + "]", s.psnr[i], {}});
        for (std::size_t i = 0; i < s.ssim.size(); ++i) rows.push_back({"ssim[" + std::to_string(i) + "]", s.ssim[i], {}});
        rows.push_back({"psnr", mean(s.psnr), s.psnr});
        rows.push_back({"ssim", mean(s.ssim), s.ssim});
        rows.push_back({"src", s.src, std::vector<double>(gt.size(), s.src)});
        csv = reports_csv(rows);
    } else {
        std::vector<double> p, q, r;
        for (std::size_t k = 0; k < a.seeds; ++k) {
            const fs::path dir = fs::path(a.pred) / ("seed_" + std::to_string(k));
            const FrameScores s = score(read_video(dir), gt, dir);
            p.push_back(mean(s.psnr));
            q.push_back(mean(s.ssim));
            r.push_back(s.src);
        }
        csv = "metric,mean,std,n_seeds\n";
        const auto row = [&](const char* name, const std::vector<double>& v) {
            csv += std::string(name) + "," + fmt("%.10g", mean(v)) + "," + fmt("%.10g", stddev(v)) + "," +
                   std::to_string(v.size()) + "\n";
        };
        row("psnr", p);
        row("ssim", q);
        row("src", r);
    }
    if (ctx.config.out.empty()) ctx.out << csv;
    else io::write_file_atomic(ctx.config.out, csv);
    return 0;
}

std::string find_config(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Context ctx{RunConfig{}, out};
    RunConfig& c = ctx.config;
    try {
        if (const std::string path = find_config(args); !path.empty()) apply_config_json(c, io::read_file(path));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"Persistent-memory world model engine"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON run config; flags override it");
    app.add_option("--seed", c.seed, "Run seed");
    app.add_option("--scene", c.scene, "Scene spec JSON (default: random room from the seed)");
    app.add_option("--grid", c.grid, "Grid spec: desk or full");
    app.add_option("--predictor", c.predictor, "oracle, maprender or memoryless");
    app.add_option("--fill", c.fill, "Empty-ray fill: constant or nearest");
    app.add_option("--stride", c.stride, "Frame stride when collecting");
    app.add_option("--width", c.width, "Image width");
    app.add_option("--height", c.height, "Image height");
    app.add_option("--fov", c.fov_deg, "Horizontal field of view in degrees");
    app.add_option("--start", c.start, "Start pose x,z,yaw");
    app.add_option("--out", c.out, "Output path");

    CollectArgs collect;
    auto* sc = app.add_subcommand("collect", "Generate a trajectory dataset");
    sc->add_option("--n", collect.n, "Number of trajectories");
    sc->add_option("--max-steps", collect.max_steps, "Action cap per trajectory");
    sc->add_option("--turnaround", collect.turnaround, "Probability of a full turn before the path");

    BuildArgs build;
    auto* sb = app.add_subcommand("build-map", "Fuse a dataset into a feature grid");
    sb->add_option("--data", build.data, "Dataset directory")->required();
    sb->add_option("--base", build.base, "Existing map to update");
    sb->add_option("--ingest-features", build.ingest, "Directory of per-frame PTEN feature tensors");
    sb->add_option("--min-hits", build.min_hits, "Drop cells with fewer contributions");

    PredictArgs predict;
    auto* sp = app.add_subcommand("predict", "Predict frames for an action chunk");
    sp->add_option("--map", predict.map, "Map file (default: built from the start observation)");
    sp->add_option("--chunk", predict.chunk, "Actions as letters F, B, L, R");
    sp->add_option("--revisit", predict.revisit, "Forward k then back k; prints SRC");

    RolloutArgs roll;
    auto* sr = app.add_subcommand("rollout", "Autoregressive rollout with map updates");
    sr->add_option("--map", roll.map, "Initial map file");
    sr->add_option("--steps", roll.steps, "Total frames");
    sr->add_option("--chunk-size", roll.chunk_size, "Actions per predicted chunk");
    sr->add_option("--path", roll.path, "figure-eight or random");

    PlanArgs plan;
    auto* sl = app.add_subcommand("plan", "Goal-conditioned planning");
    sl->add_option("--map", plan.map, "Initial map file");
    sl->add_option("--mode", plan.mode, "rank or cem");
    sl->add_option("--n", plan.n, "Candidates (rank, default 16) or samples (cem, default 60)");
    sl->add_option("--horizon", plan.horizon, "Chunk length");
    sl->add_option("--iters", plan.iters, "CEM iterations");
    sl->add_option("--elite", plan.elite, "CEM elite fraction");
    sl->add_option("--goal-chunk", plan.goal_chunk, "Actions whose final view is the goal");
    sl->add_option("--cost", plan.cost, "mse or cosine");

    BlockCheckOptions check;
    auto* sk = app.add_subcommand("check-block", "Verify the memory block against finite differences");
    sk->add_option("--instances", check.instances, "Random instances per check");
    sk->add_flag("--inject-gradient-error", check.inject_gradient_error, "Corrupt one analytic gradient");

    EvalArgs eval;
    auto* se = app.add_subcommand("eval", "Frame metrics of a prediction against ground truth");
    se->add_option("--pred", eval.pred, "Predicted video directory")->required();
    se->add_option("--gt", eval.gt, "Ground-truth video directory")->required();
    se->add_option("--seeds", eval.seeds, "Aggregate pred/seed_<i> over this many seeds");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (sc->parsed()) return cmd_collect(ctx, collect);
        if (sb->parsed()) return cmd_build_map(ctx, build);
        if (sp->parsed()) return cmd_predict(ctx, predict);
        if (sr->parsed()) return cmd_rollout(ctx, roll);
        if (sl->parsed()) return cmd_plan(ctx, plan);
        if (sk->parsed()) return cmd_check_block(ctx, check);
        if (se->parsed()) return cmd_eval(ctx, eval);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace pmem::cli
