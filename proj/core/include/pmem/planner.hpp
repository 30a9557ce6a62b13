#pragma once

// Goal-conditioned planning against a world model: exhaustive ranking of
// candidate action chunks and cross-entropy-method MPC over per-step
// categorical action distributions.

#include "pmem/predictor.hpp"
#include "pmem/scene_sim.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pmem {

enum class CostKind { MSE, FeatureCosine };

/// Compares only the last frame of `video` with the goal; lower is better.
/// MSE is the mean squared RGB error, FeatureCosine is 1 - cosine similarity
/// of the flattened patch features.
double goal_cost(const RgbdVideo& video, const RgbdFrame& goal, CostKind kind = CostKind::MSE);

struct RankedCandidates {
    std::vector<ActionChunk> chunks;
    std::vector<double> costs;
    std::vector<std::size_t> order;  // ascending cost, ties by candidate index

    const ActionChunk& best() const { return chunks.at(order.at(0)); }
};

RankedCandidates rank_trajectories(const Predictor& predictor, const WorldState& state,
                                   std::span<const ActionChunk> candidates, const RgbdFrame& goal,
                                   const CameraIntrinsics& K, CostKind kind = CostKind::MSE);

/// Per-step categorical over kAllActions (MoveForward, MoveBackward, TurnLeft, TurnRight).
struct ActionDistribution {
    std::vector<std::array<double, 4>> probs;

    static ActionDistribution uniform(std::size_t steps);
    bool is_valid(double tol = 1e-9) const;
};

struct CemOptions {
    std::size_t horizon = 8;
    std::size_t n_samples = 60;
    double elite_frac = 0.30;
    std::size_t iters = 30;
    std::uint64_t seed = 0;
    double smoothing = 0.01;
    double step_size = 0.3;  // blend towards the elite frequencies; 1 refits outright
    CostKind cost = CostKind::MSE;
    ActionMagnitudes magnitudes;
};

struct CemIteration {
    std::size_t iteration = 0;
    double best_cost = 0.0;        // best cost seen so far
    double mean_elite_cost = 0.0;  // mean over this iteration's elites
};

struct CemResult {
    ActionChunk best;
    double best_cost = 0.0;
    ActionDistribution distribution;
    std::vector<CemIteration> trace;
};

/// ceil(elite_frac * n), at least 1; elite_frac in (0, 1].
std::size_t elite_count(std::size_t n_samples, double elite_frac);

/// Starts from uniform distributions; each iteration samples n chunks, scores
/// the predicted videos, keeps the elites and moves every step's categorical
/// towards the elite frequencies (p <- a * freq + (1 - a) * p + eps, then
/// renormalized). Deterministic given options.seed.
CemResult cem_plan(const Predictor& predictor, const WorldState& state, const RgbdFrame& goal,
                   const CameraIntrinsics& K, const CemOptions& options = {});

/// Rows: iteration,best_cost,mean_elite_cost.
std::string cem_trace_csv(std::span<const CemIteration> trace);

struct RelabeledTrajectory {
    RgbdFrame goal;
    std::vector<double> rewards;  // one per pose: -distance to the final position
};

RelabeledTrajectory hindsight_relabel(const Trajectory& trajectory);

}  // namespace pmem
