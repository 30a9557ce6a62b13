#include "pmem/protocols.hpp"

#include "pmem/errors.hpp"
#include "pmem/metrics.hpp"

#include <cmath>
#include <numbers>

namespace pmem {

ActionChunk figure_eight_actions(std::size_t steps, const ActionMagnitudes& magnitudes) {
    const auto turns = static_cast<std::size_t>(std::lround((std::numbers::pi / 2.0) / magnitudes.turn));
    require(turns >= 1, "figure_eight_actions: turn magnitude exceeds 90 degrees");
    require(steps >= 8 * (turns + 1), "figure_eight_actions: too few steps for a figure eight");
    const std::size_t side = steps / 8 - turns;
    ActionChunk out;
    for (ActionKind turn : {ActionKind::TurnLeft, ActionKind::TurnRight}) {
        for (int corner = 0; corner < 4; ++corner) {
            for (std::size_t i = 0; i < side; ++i) out.push_back(magnitudes.make(ActionKind::MoveForward));
            for (std::size_t i = 0; i < turns; ++i) out.push_back(magnitudes.make(turn));
        }
    }
    while (out.size() < steps) out.push_back(magnitudes.make(ActionKind::TurnLeft));
    return out;
}

RevisitResult forward_reverse_revisit(const Predictor& predictor, const WorldState& state, std::size_t k,
                                      const CameraIntrinsics& K, const ActionMagnitudes& magnitudes) {
    require(k >= 2, "forward_reverse_revisit: k must be >= 2");
    const ActionChunk forward(k, magnitudes.make(ActionKind::MoveForward));
    const ActionChunk backward(k, magnitudes.make(ActionKind::MoveBackward));
    const RgbdVideo out = predictor.predict(state, forward, K);
    const WorldState turned{out.poses.back(), state.map, out.frames.back()};
    const RgbdVideo back = predictor.predict(turned, backward, K);

    // out.poses[m - 1] and back.poses[k - 1 - m] both sit at the m-th pose
    RevisitResult r;
    for (std::size_t m = 1; m < k; ++m) {
        r.first_visit.frames.push_back(out.frames[m - 1]);
        r.first_visit.poses.push_back(out.poses[m - 1]);
        r.revisit.frames.push_back(back.frames[k - 1 - m]);
        r.revisit.poses.push_back(back.poses[k - 1 - m]);
    }
    r.src = src(r.first_visit, r.revisit);
    return r;
}

std::vector<std::pair<std::size_t, std::size_t>> revisited_pairs(const RgbdVideo& video, double tol) {
    const auto same = [tol](const CameraPose& a, const CameraPose& b) {
        return (a.rotation - b.rotation).cwiseAbs().maxCoeff() <= tol &&
               (a.translation - b.translation).cwiseAbs().maxCoeff() <= tol;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t j = 1; j < video.poses.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (same(video.poses[i], video.poses[j])) {
                pairs.emplace_back(i, j);
                break;
            }
        }
    }
    return pairs;
}

RevisitResult revisit_src(const RgbdVideo& video, double tol) {
    require(video.frames.size() == video.poses.size(), "revisit_src: every frame needs a pose");
    RevisitResult r;
    for (const auto& [i, j] : revisited_pairs(video, tol)) {
        r.first_visit.frames.push_back(video.frames[i]);
        r.first_visit.poses.push_back(video.poses[i]);
        r.revisit.frames.push_back(video.frames[j]);
        r.revisit.poses.push_back(video.poses[j]);
    }
    if (r.first_visit.size() == 0) throw Error("no revisited poses");
    r.src = src(r.first_visit, r.revisit, tol);
    return r;
}

}  // namespace pmem
