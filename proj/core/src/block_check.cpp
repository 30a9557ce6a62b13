#include "pmem/block_check.hpp"

#include "pmem/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace pmem {

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

double loss(const BlockInputs& in, const BlockParams& p, const Matrix& upstream) {
    return (memory_block_forward(in, p).cwiseProduct(upstream)).sum();
}

// Central difference of the loss with respect to every entry of `target`,
// which must alias part of `in` or `p`.
Matrix numeric_gradient(Matrix& target, const BlockInputs& in, const BlockParams& p, const Matrix& upstream, double h) {
    Matrix g(target.rows(), target.cols());
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double saved = target.data()[i];
        target.data()[i] = saved + h;
        const double up = loss(in, p, upstream);
        target.data()[i] = saved - h;
        const double down = loss(in, p, upstream);
        target.data()[i] = saved;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

std::string format(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

}  // namespace

BlockInputs random_block_inputs(const BlockDims& dims, int tokens, int memory_tokens, std::uint64_t seed, double scale) {
    Rng rng(seed);
    BlockInputs in;
    in.hidden = random_matrix(rng, tokens, dims.hidden, scale);
    in.camera = random_matrix(rng, tokens, dims.camera, scale);
    in.memory = random_matrix(rng, memory_tokens, dims.memory, scale);
    in.time = random_matrix(rng, 1, dims.time, scale);
    return in;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-8});
    return (analytic - numeric).norm() / denom;
}

GradientCheck finite_difference_check(const BlockInputs& inputs, const BlockParams& params, const Matrix& upstream,
                                      double h, double corrupt) {
    BlockCache cache;
    memory_block_forward(inputs, params, &cache);
    BlockGradients analytic = memory_block_backward(upstream, cache, params);
    analytic.params.w_q *= 1.0 + corrupt;

    GradientCheck report;
    auto record = [&](std::string name, const Matrix& a, const Matrix& n) {
        const double err = relative_error(a, n);
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.tensors.push_back({std::move(name), err});
    };

    BlockInputs in = inputs;
    BlockParams p = params;
    record("hidden", analytic.hidden, numeric_gradient(in.hidden, in, p, upstream, h));
    record("camera", analytic.camera, numeric_gradient(in.camera, in, p, upstream, h));
    record("memory", analytic.memory, numeric_gradient(in.memory, in, p, upstream, h));
    {
        Matrix g(1, in.time.cols());
        for (Eigen::Index i = 0; i < in.time.cols(); ++i) {
            const double saved = in.time(i);
            in.time(i) = saved + h;
            const double up = loss(in, p, upstream);
            in.time(i) = saved - h;
            const double down = loss(in, p, upstream);
            in.time(i) = saved;
            g(0, i) = (up - down) / (2.0 * h);
        }
        record("time", Matrix(analytic.time), g);
    }

    std::vector<std::pair<std::string, Matrix*>> tensors;
    p.for_each([&](std::string_view name, Matrix& m) { tensors.emplace_back(std::string(name), &m); });
    std::vector<const Matrix*> grads;
    analytic.params.for_each([&](std::string_view, const Matrix& m) { grads.push_back(&m); });
    for (std::size_t i = 0; i < tensors.size(); ++i)
        record(tensors[i].first, *grads[i], numeric_gradient(*tensors[i].second, in, p, upstream, h));
    return report;
}

bool BlockCheckReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

BlockCheckReport run_block_checks(const BlockCheckOptions& options) {
    BlockCheckReport report;
    const BlockDims& dims = options.dims;

    // identity at initialization, with and without memory
    {
        bool ok = true;
        for (int i = 0; i < options.instances; ++i) {
            const std::uint64_t seed = mix_seed(options.seed, static_cast<std::uint64_t>(i));
            const BlockParams p = BlockParams::init(dims, seed);
            for (int m : {options.memory_tokens, 0}) {
                const BlockInputs in = random_block_inputs(dims, options.tokens, m, seed ^ 1);
                const Matrix out = memory_block_forward(in, p);
                ok = ok && out.rows() == in.hidden.rows() &&
                     std::memcmp(out.data(), in.hidden.data(), sizeof(double) * static_cast<std::size_t>(out.size())) == 0;
            }
        }
        report.checks.push_back({"identity_at_init", ok, ok ? 0.0 : 1.0, ok ? "forward(H) == H bitwise" : "output differs from H"});
    }

    // attention rows are probability vectors
    {
        double worst = 0.0;
        for (int i = 0; i < options.instances; ++i) {
            const std::uint64_t seed = mix_seed(options.seed, 1000 + static_cast<std::uint64_t>(i));
            const BlockParams p = BlockParams::random(dims, seed, 2.0);
            const BlockInputs in = random_block_inputs(dims, options.tokens, options.memory_tokens, seed ^ 2, 3.0);
            Matrix weights;
            const Matrix x = (Matrix(in.hidden.rows(), dims.query_in()) << in.hidden, in.camera).finished();
            cross_attention(x, in.memory, p, &weights);
            for (Eigen::Index r = 0; r < weights.rows(); ++r) {
                worst = std::max(worst, std::abs(weights.row(r).sum() - 1.0));
                if (weights.row(r).minCoeff() < 0.0) worst = std::max(worst, 1.0);
            }
        }
        report.checks.push_back({"attention_rows_sum_to_one", worst <= 1e-9, worst, "max |row sum - 1| = " + format("%.3g", worst)});
    }

    // analytic gradients against central differences
    {
        double worst = 0.0;
        std::string worst_name;
        for (int i = 0; i < options.instances; ++i) {
            const std::uint64_t seed = mix_seed(options.seed, 2000 + static_cast<std::uint64_t>(i));
            const BlockParams p = BlockParams::random(dims, seed);
            const BlockInputs in = random_block_inputs(dims, options.tokens, options.memory_tokens, seed ^ 3);
            Rng rng(seed ^ 4);
            const Matrix upstream = random_matrix(rng, options.tokens, dims.hidden, 1.0);
            const GradientCheck g = finite_difference_check(in, p, upstream, options.h,
                                                            options.inject_gradient_error ? 1e-2 : 0.0);
            for (const TensorError& t : g.tensors)
                if (t.rel_error > worst) {
                    worst = t.rel_error;
                    worst_name = t.name;
                }
        }
        report.max_gradient_error = worst;
        report.checks.push_back({"gradients_match_finite_differences", worst < options.gradient_tolerance, worst,
                                 "max relative error " + format("%.3e", worst) + " (" + worst_name + ")"});
    }

    // memory tokens form a set
    {
        double worst = 0.0;
        for (int i = 0; i < options.instances; ++i) {
            const std::uint64_t seed = mix_seed(options.seed, 3000 + static_cast<std::uint64_t>(i));
            const BlockParams p = BlockParams::random(dims, seed);
            BlockInputs in = random_block_inputs(dims, options.tokens, options.memory_tokens, seed ^ 5);
            const Matrix base = memory_block_forward(in, p);
            Rng rng(seed ^ 6);
            const Eigen::Index m = in.memory.rows();
            std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
            for (Eigen::Index k = 0; k < m; ++k) perm[static_cast<std::size_t>(k)] = k;
            for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
            Matrix shuffled(m, in.memory.cols());
            for (Eigen::Index k = 0; k < m; ++k) shuffled.row(k) = in.memory.row(perm[static_cast<std::size_t>(k)]);
            in.memory = shuffled;
            worst = std::max(worst, (memory_block_forward(in, p) - base).cwiseAbs().maxCoeff());
        }
        report.checks.push_back({"memory_permutation_invariance", worst <= 1e-10, worst, "max |delta| = " + format("%.3g", worst)});
    }
    return report;
}

}  // namespace pmem
