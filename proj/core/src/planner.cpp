#include "pmem/planner.hpp"

#include "pmem/errors.hpp"
#include "pmem/feature.hpp"
#include "pmem/parallel.hpp"
#include "pmem/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

namespace pmem {

double goal_cost(const RgbdVideo& video, const RgbdFrame& goal, CostKind kind) {
    require(!video.frames.empty(), "goal_cost: empty video");
    const RgbdFrame& last = video.frames.back();
    require(last.width == goal.width && last.height == goal.height, "goal_cost: resolution mismatch");

    if (kind == CostKind::MSE) {
        double sum = 0.0;
        for (std::size_t i = 0; i < last.rgb.size(); ++i) {
            const double d = static_cast<double>(last.rgb[i]) - goal.rgb[i];
            sum += d * d;
        }
        return sum / static_cast<double>(last.rgb.size());
    }

    const FeatureMap a = extract_features(last);
    const FeatureMap b = extract_features(goal);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        dot += a.data[i] * b.data[i];
        na += a.data[i] * a.data[i];
        nb += b.data[i] * b.data[i];
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / std::sqrt(na * nb);
}

namespace {

std::vector<std::size_t> stable_order(const std::vector<double>& costs) {
    std::vector<std::size_t> order(costs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
    return order;
}

std::vector<double> evaluate(const Predictor& predictor, const WorldState& state,
                             std::span<const ActionChunk> candidates, const RgbdFrame& goal,
                             const CameraIntrinsics& K, CostKind kind) {
    std::vector<double> costs(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        costs[i] = goal_cost(predictor.predict(state, candidates[i], K), goal, kind);
    });
    return costs;
}

}  // namespace

RankedCandidates rank_trajectories(const Predictor& predictor, const WorldState& state,
                                   std::span<const ActionChunk> candidates, const RgbdFrame& goal,
                                   const CameraIntrinsics& K, CostKind kind) {
    require(!candidates.empty(), "rank_trajectories: need at least one candidate");
    RankedCandidates ranked;
    ranked.chunks.assign(candidates.begin(), candidates.end());
    ranked.costs = evaluate(predictor, state, candidates, goal, K, kind);
    ranked.order = stable_order(ranked.costs);
    return ranked;
}

ActionDistribution ActionDistribution::uniform(std::size_t steps) {
    ActionDistribution d;
    d.probs.assign(steps, {0.25, 0.25, 0.25, 0.25});
    return d;
}

bool ActionDistribution::is_valid(double tol) const {
    for (const auto& row : probs) {
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) return false;
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

std::size_t elite_count(std::size_t n_samples, double elite_frac) {
    require(elite_frac > 0.0 && elite_frac <= 1.0, "elite_frac must be in (0, 1]");
    // the small slack keeps products such as 0.3 * 60 from rounding up
    const double raw = std::ceil(elite_frac * static_cast<double>(n_samples) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n_samples);
}

CemResult cem_plan(const Predictor& predictor, const WorldState& state, const RgbdFrame& goal,
                   const CameraIntrinsics& K, const CemOptions& options) {
    require(options.horizon >= 1, "cem_plan: horizon must be >= 1");
    require(options.n_samples >= 1, "cem_plan: n_samples must be >= 1");
    require(options.elite_frac > 0.0 && options.elite_frac <= 1.0, "cem_plan: elite_frac must be in (0, 1]");
    require(options.smoothing >= 0.0, "cem_plan: smoothing must be non-negative");
    require(options.step_size > 0.0 && options.step_size <= 1.0, "cem_plan: step_size must be in (0, 1]");

    Rng rng(options.seed);
    CemResult result;
    result.distribution = ActionDistribution::uniform(options.horizon);
    result.best_cost = std::numeric_limits<double>::infinity();
    const std::size_t n_elite = elite_count(options.n_samples, options.elite_frac);

    // identical chunks are scored once; keyed by action indices
    std::map<std::vector<int>, double> memo;

    for (std::size_t iter = 0; iter < options.iters; ++iter) {
        std::vector<std::vector<int>> codes(options.n_samples, std::vector<int>(options.horizon));
        std::vector<ActionChunk> chunks(options.n_samples);
        for (std::size_t s = 0; s < options.n_samples; ++s) {
            for (std::size_t t = 0; t < options.horizon; ++t) {
                const int a = static_cast<int>(rng.categorical(result.distribution.probs[t]));
                codes[s][t] = a;
                chunks[s].push_back(options.magnitudes.make(kAllActions[a]));
            }
        }

        std::vector<std::size_t> pending;
        for (std::size_t s = 0; s < options.n_samples; ++s)
            if (!memo.count(codes[s])) pending.push_back(s);
        std::vector<double> fresh(pending.size());
        parallel_for(pending.size(), [&](std::size_t i) {
            fresh[i] = goal_cost(predictor.predict(state, chunks[pending[i]], K), goal, options.cost);
        });
        for (std::size_t i = 0; i < pending.size(); ++i) memo.emplace(codes[pending[i]], fresh[i]);

        std::vector<double> costs(options.n_samples);
        for (std::size_t s = 0; s < options.n_samples; ++s) costs[s] = memo.at(codes[s]);
        const auto order = stable_order(costs);

        if (costs[order[0]] < result.best_cost) {
            result.best_cost = costs[order[0]];
            result.best = chunks[order[0]];
        }

        double elite_sum = 0.0;
        std::vector<std::array<double, 4>> counts(options.horizon, {0.0, 0.0, 0.0, 0.0});
        for (std::size_t e = 0; e < n_elite; ++e) {
            elite_sum += costs[order[e]];
            for (std::size_t t = 0; t < options.horizon; ++t) counts[t][static_cast<std::size_t>(codes[order[e]][t])] += 1.0;
        }
        for (std::size_t t = 0; t < options.horizon; ++t) {
            auto& row = result.distribution.probs[t];
            double total = 0.0;
            for (std::size_t a = 0; a < 4; ++a) {
                row[a] = options.step_size * counts[t][a] / static_cast<double>(n_elite) +
                         (1.0 - options.step_size) * row[a] + options.smoothing;
                total += row[a];
            }
            for (double& p : row) p /= total;
        }
        result.trace.push_back({iter, result.best_cost, elite_sum / static_cast<double>(n_elite)});
    }
    return result;
}

std::string cem_trace_csv(std::span<const CemIteration> trace) {
    std::string out = "iteration,best_cost,mean_elite_cost\n";
    char line[128];
    for (const CemIteration& it : trace) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", it.iteration, it.best_cost, it.mean_elite_cost);
        out += line;
    }
    return out;
}

RelabeledTrajectory hindsight_relabel(const Trajectory& trajectory) {
    require(!trajectory.frames.empty() && !trajectory.poses.empty(), "hindsight_relabel: empty trajectory");
    RelabeledTrajectory out;
    out.goal = trajectory.frames.back();
    const Vec3& final_position = trajectory.poses.back().translation;
    out.rewards.reserve(trajectory.poses.size());
    for (const CameraPose& pose : trajectory.poses) out.rewards.push_back(-(pose.translation - final_position).norm());
    return out;
}

}  // namespace pmem
