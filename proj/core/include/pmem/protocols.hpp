#pragma once

// Revisit protocols shared by the CLI and the acceptance checks.

#include "pmem/predictor.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace pmem {

/// A square loop turning left followed by the same loop turning right, both
/// starting along the initial heading, so the first side is driven twice.
/// Each corner is round(90 deg / turn) turns; the side length is chosen so
/// that the path fills `steps`, and any remainder is padded with left turns.
ActionChunk figure_eight_actions(std::size_t steps, const ActionMagnitudes& magnitudes = {});

struct RevisitResult {
    RgbdVideo first_visit;
    RgbdVideo revisit;
    double src = 0.0;
};

/// Predicts k MoveForward steps, then k MoveBackward steps from the reached
/// pose with the same map, and scores the k - 1 intermediate poses visited in
/// both directions. Requires k >= 2.
RevisitResult forward_reverse_revisit(const Predictor& predictor, const WorldState& state, std::size_t k,
                                      const CameraIntrinsics& K, const ActionMagnitudes& magnitudes = {});

/// Pairs (i, j), i < j, where frame j repeats the pose of an earlier frame i
/// within `tol` (max-abs over rotation and translation entries); i is the
/// earliest such frame.
std::vector<std::pair<std::size_t, std::size_t>> revisited_pairs(const RgbdVideo& video, double tol = 1e-6);

/// SRC over revisited_pairs. Throws pmem::Error when nothing is revisited.
RevisitResult revisit_src(const RgbdVideo& video, double tol = 1e-6);

}  // namespace pmem
