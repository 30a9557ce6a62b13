#pragma once

// Memory block: expert adaptive layernorm over video hidden states and memory
// tokens, single-head cross-attention from video to memory, and a GELU
// feed-forward, each added back through gates regressed from the time
// embedding:
//
//   H_norm, M_norm, a_H, a_M = norm1([H | C], M, t)
//   H = H + a_M * Attn(H_norm, M_norm)
//   H = H + a_H * ff(norm2(H))
//
// Everything here is double precision and comes with an exact backward pass.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace pmem {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct BlockDims {
    int hidden = 8;   // width of H
    int camera = 6;   // width of the per-token camera embedding C
    int memory = 60;  // width of a memory token (features + position embedding)
    int time = 8;     // width of the time embedding
    int attn = 32;    // query/key/value width
    int ff = 32;      // feed-forward inner width

    int query_in() const { return hidden + camera; }
    bool operator==(const BlockDims&) const = default;
};

/// All tensors are matrices; biases and per-channel vectors are 1 x n.
struct BlockParams {
    BlockDims dims;
    double eps = 1e-5;

    // time-embedding regressors: video stream scale/shift over [H | C], memory
    // stream scale/shift, and the two branch gates over H
    Matrix gamma_h_w, gamma_h_b, beta_h_w, beta_h_b;
    Matrix gamma_m_w, gamma_m_b, beta_m_w, beta_m_b;
    Matrix alpha_h_w, alpha_h_b, alpha_m_w, alpha_m_b;
    // attention
    Matrix w_q, w_k, w_v, w_o;
    // plain layernorm before ff
    Matrix ln2_gain, ln2_bias;
    // feed-forward
    Matrix ff1_w, ff1_b, ff2_w, ff2_b;

    /// Shape-correct zeros everywhere (the layout used for gradients).
    static BlockParams zeros(const BlockDims& dims);
    /// Random projections, zero biases, and zero-initialized output
    /// projections (w_o, ff2_w, ff2_b) so the block starts as the identity.
    static BlockParams init(const BlockDims& dims, std::uint64_t seed);
    /// Every tensor random, for gradient checks.
    static BlockParams random(const BlockDims& dims, std::uint64_t seed, double scale = 0.5);

    void for_each(const std::function<void(std::string_view, Matrix&)>& fn);
    void for_each(const std::function<void(std::string_view, const Matrix&)>& fn) const;
    /// Hash over shapes and values; used to detect stale forward caches.
    std::uint64_t fingerprint() const;
};

struct BlockInputs {
    Matrix hidden;   // n x hidden
    Matrix camera;   // n x camera
    Matrix memory;   // m x memory, m may be 0
    RowVector time;  // 1 x time
};

struct AdaptiveNormOutput {
    Matrix video;       // normalized, scaled and shifted [H | C]
    Matrix memory;      // normalized, scaled and shifted M
    RowVector alpha_h;  // ff gate
    RowVector alpha_m;  // attention gate
};

/// Per-token layernorm of both streams followed by (1 + gamma, beta) from the
/// stream's own regressors.
AdaptiveNormOutput adaptive_layernorm(const Matrix& video, const Matrix& memory, const RowVector& time,
                                      const BlockParams& params);

/// softmax(Q K^T / sqrt(d)) V W_o. With no memory tokens the result is zero.
/// When `weights` is given it receives the n x m attention matrix.
Matrix cross_attention(const Matrix& queries, const Matrix& memory, const BlockParams& params,
                       Matrix* weights = nullptr);

/// Row-wise layernorm without affine terms.
Matrix layernorm_rows(const Matrix& x, double eps);

struct BlockCache {
    bool valid = false;
    std::uint64_t param_fingerprint = 0;
    BlockInputs inputs;
    Matrix x, x_hat, x_inv_std;      // [H | C] and its normalization
    Matrix m_hat, m_inv_std;
    RowVector gamma_h, beta_h, gamma_m, beta_m, alpha_h, alpha_m;
    Matrix h_norm, m_norm, q, k, v, attn, o, attn_out;
    Matrix h1, z_hat, z_inv_std, z, u, g, f;
    Matrix out;
};

Matrix memory_block_forward(const BlockInputs& inputs, const BlockParams& params, BlockCache* cache = nullptr);

struct BlockGradients {
    Matrix hidden, camera, memory;
    RowVector time;
    BlockParams params;
};

/// Gradients of sum(upstream .* forward) for every input and parameter.
/// Throws pmem::Error when the cache is missing or was produced with other params.
BlockGradients memory_block_backward(const Matrix& upstream, const BlockCache& cache, const BlockParams& params);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace pmem
