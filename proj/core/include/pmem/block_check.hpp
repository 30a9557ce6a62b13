#pragma once

// Self-checks for the memory block: central finite differences against the
// analytic backward pass, identity at initialization, row-stochastic
// attention and invariance to the order of memory tokens.

#include "pmem/memory_block.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pmem {

/// Entries uniform in [-scale, scale].
BlockInputs random_block_inputs(const BlockDims& dims, int tokens, int memory_tokens, std::uint64_t seed,
                                double scale = 1.0);

struct TensorError {
    std::string name;
    double rel_error = 0.0;
};

struct GradientCheck {
    std::vector<TensorError> tensors;
    double max_rel_error = 0.0;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-8) in the Frobenius norm.
double relative_error(const Matrix& analytic, const Matrix& numeric);

/// Compares every input and parameter gradient of sum(upstream .* out) with
/// central differences of step h. `corrupt` scales the analytic w_q gradient
/// by (1 + corrupt) to exercise the harness itself.
GradientCheck finite_difference_check(const BlockInputs& inputs, const BlockParams& params, const Matrix& upstream,
                                      double h = 1e-5, double corrupt = 0.0);

struct BlockCheckOptions {
    std::uint64_t seed = 0;
    int instances = 20;
    int tokens = 4;
    int memory_tokens = 5;
    BlockDims dims{8, 6, 12, 8, 8, 16};
    double h = 1e-5;
    double gradient_tolerance = 1e-4;
    bool inject_gradient_error = false;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;  // the measured worst case
    std::string detail;
};

struct BlockCheckReport {
    std::vector<CheckResult> checks;
    double max_gradient_error = 0.0;

    bool passed() const;
};

BlockCheckReport run_block_checks(const BlockCheckOptions& options = {});

}  // namespace pmem
