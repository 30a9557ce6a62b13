#include "pmem/memory_block.hpp"

#include "pmem/errors.hpp"
#include "pmem/random.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace pmem {
namespace {

struct RowNorm {
    Matrix hat;
    Matrix inv_std;  // n x 1
};

RowNorm normalize_rows(const Matrix& x, double eps) {
    RowNorm r;
    const double d = static_cast<double>(x.cols());
    const Eigen::VectorXd mean = x.rowwise().sum() / d;
    const Matrix centered = x.colwise() - mean;
    const Eigen::VectorXd var = centered.array().square().rowwise().sum() / d;
    r.inv_std = (var.array() + eps).rsqrt().matrix();
    r.hat = centered.array().colwise() * r.inv_std.col(0).array();
    return r;
}

// d/dx of row-wise layernorm given d/dx_hat.
Matrix normalize_rows_backward(const Matrix& d_hat, const Matrix& hat, const Matrix& inv_std) {
    const double d = static_cast<double>(hat.cols());
    const Eigen::VectorXd mean_d = d_hat.rowwise().sum() / d;
    const Eigen::VectorXd mean_dh = d_hat.cwiseProduct(hat).rowwise().sum() / d;
    Matrix dx = (d_hat.colwise() - mean_d) - (hat.array().colwise() * mean_dh.array()).matrix();
    return dx.array().colwise() * inv_std.col(0).array();
}

RowVector regress(const RowVector& t, const Matrix& w, const Matrix& b) { return t * w + b; }

Matrix scale_shift(const Matrix& hat, const RowVector& gamma, const RowVector& beta) {
    Matrix out = hat.array().rowwise() * (1.0 + gamma.array());
    out.rowwise() += beta;
    return out;
}

Matrix softmax_rows(const Matrix& s) {
    Matrix out = s.colwise() - s.rowwise().maxCoeff();
    out = out.array().exp();
    const Eigen::VectorXd sums = out.rowwise().sum();
    return out.array().colwise() / sums.array();
}

Matrix random_matrix(Rng& rng, int rows, int cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

void check_inputs(const BlockInputs& in, const BlockDims& dims) {
    require(in.hidden.cols() == dims.hidden, "memory block: hidden width mismatch");
    require(in.camera.cols() == dims.camera, "memory block: camera width mismatch");
    require(in.hidden.rows() == in.camera.rows(), "memory block: H and C token counts differ");
    require(in.memory.rows() == 0 || in.memory.cols() == dims.memory, "memory block: memory width mismatch");
    require(in.time.cols() == dims.time, "memory block: time embedding width mismatch");
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

BlockParams BlockParams::zeros(const BlockDims& dims) {
    BlockParams p;
    p.dims = dims;
    const int q = dims.query_in();
    p.gamma_h_w = Matrix::Zero(dims.time, q);
    p.gamma_h_b = Matrix::Zero(1, q);
    p.beta_h_w = Matrix::Zero(dims.time, q);
    p.beta_h_b = Matrix::Zero(1, q);
    p.gamma_m_w = Matrix::Zero(dims.time, dims.memory);
    p.gamma_m_b = Matrix::Zero(1, dims.memory);
    p.beta_m_w = Matrix::Zero(dims.time, dims.memory);
    p.beta_m_b = Matrix::Zero(1, dims.memory);
    p.alpha_h_w = Matrix::Zero(dims.time, dims.hidden);
    p.alpha_h_b = Matrix::Zero(1, dims.hidden);
    p.alpha_m_w = Matrix::Zero(dims.time, dims.hidden);
    p.alpha_m_b = Matrix::Zero(1, dims.hidden);
    p.w_q = Matrix::Zero(q, dims.attn);
    p.w_k = Matrix::Zero(dims.memory, dims.attn);
    p.w_v = Matrix::Zero(dims.memory, dims.attn);
    p.w_o = Matrix::Zero(dims.attn, dims.hidden);
    p.ln2_gain = Matrix::Zero(1, dims.hidden);
    p.ln2_bias = Matrix::Zero(1, dims.hidden);
    p.ff1_w = Matrix::Zero(dims.hidden, dims.ff);
    p.ff1_b = Matrix::Zero(1, dims.ff);
    p.ff2_w = Matrix::Zero(dims.ff, dims.hidden);
    p.ff2_b = Matrix::Zero(1, dims.hidden);
    return p;
}

BlockParams BlockParams::init(const BlockDims& dims, std::uint64_t seed) {
    BlockParams p = zeros(dims);
    Rng rng(seed);
    const double t_scale = 1.0 / std::sqrt(static_cast<double>(dims.time));
    for (Matrix* w : {&p.gamma_h_w, &p.beta_h_w, &p.gamma_m_w, &p.beta_m_w, &p.alpha_h_w, &p.alpha_m_w})
        *w = random_matrix(rng, static_cast<int>(w->rows()), static_cast<int>(w->cols()), t_scale);
    p.w_q = random_matrix(rng, dims.query_in(), dims.attn, 1.0 / std::sqrt(static_cast<double>(dims.query_in())));
    p.w_k = random_matrix(rng, dims.memory, dims.attn, 1.0 / std::sqrt(static_cast<double>(dims.memory)));
    p.w_v = random_matrix(rng, dims.memory, dims.attn, 1.0 / std::sqrt(static_cast<double>(dims.memory)));
    p.ln2_gain.setOnes();
    p.ff1_w = random_matrix(rng, dims.hidden, dims.ff, 1.0 / std::sqrt(static_cast<double>(dims.hidden)));
    // w_o, ff2_w, ff2_b stay zero
    return p;
}

BlockParams BlockParams::random(const BlockDims& dims, std::uint64_t seed, double scale) {
    BlockParams p = zeros(dims);
    Rng rng(seed);
    p.for_each([&](std::string_view, Matrix& m) {
        m = random_matrix(rng, static_cast<int>(m.rows()), static_cast<int>(m.cols()), scale);
    });
    p.ln2_gain.array() += 1.0;
    return p;
}

void BlockParams::for_each(const std::function<void(std::string_view, Matrix&)>& fn) {
    fn("gamma_h_w", gamma_h_w);
    fn("gamma_h_b", gamma_h_b);
    fn("beta_h_w", beta_h_w);
    fn("beta_h_b", beta_h_b);
    fn("gamma_m_w", gamma_m_w);
    fn("gamma_m_b", gamma_m_b);
    fn("beta_m_w", beta_m_w);
    fn("beta_m_b", beta_m_b);
    fn("alpha_h_w", alpha_h_w);
    fn("alpha_h_b", alpha_h_b);
    fn("alpha_m_w", alpha_m_w);
    fn("alpha_m_b", alpha_m_b);
    fn("w_q", w_q);
    fn("w_k", w_k);
    fn("w_v", w_v);
    fn("w_o", w_o);
    fn("ln2_gain", ln2_gain);
    fn("ln2_bias", ln2_bias);
    fn("ff1_w", ff1_w);
    fn("ff1_b", ff1_b);
    fn("ff2_w", ff2_w);
    fn("ff2_b", ff2_b);
}

void BlockParams::for_each(const std::function<void(std::string_view, const Matrix&)>& fn) const {
    const_cast<BlockParams*>(this)->for_each([&](std::string_view name, Matrix& m) { fn(name, m); });
}

std::uint64_t BlockParams::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t x) {
        h ^= x;
        h *= 0x100000001b3ULL;
    };
    mix(std::bit_cast<std::uint64_t>(eps));
    for_each([&](std::string_view, const Matrix& m) {
        mix(static_cast<std::uint64_t>(m.rows()));
        mix(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) mix(std::bit_cast<std::uint64_t>(m.data()[i]));
    });
    return h;
}

Matrix layernorm_rows(const Matrix& x, double eps) { return normalize_rows(x, eps).hat; }

AdaptiveNormOutput adaptive_layernorm(const Matrix& video, const Matrix& memory, const RowVector& time,
                                      const BlockParams& params) {
    const BlockDims& d = params.dims;
    require(video.cols() == d.query_in(), "adaptive_layernorm: video stream width mismatch");
    require(memory.rows() == 0 || memory.cols() == d.memory, "adaptive_layernorm: memory width mismatch");
    require(time.cols() == d.time, "adaptive_layernorm: time embedding width mismatch");
    AdaptiveNormOutput out;
    out.video = scale_shift(normalize_rows(video, params.eps).hat, regress(time, params.gamma_h_w, params.gamma_h_b),
                            regress(time, params.beta_h_w, params.beta_h_b));
    if (memory.rows() > 0) {
        out.memory = scale_shift(normalize_rows(memory, params.eps).hat,
                                 regress(time, params.gamma_m_w, params.gamma_m_b),
                                 regress(time, params.beta_m_w, params.beta_m_b));
    } else {
        out.memory = Matrix(0, d.memory);
    }
    out.alpha_h = regress(time, params.alpha_h_w, params.alpha_h_b);
    out.alpha_m = regress(time, params.alpha_m_w, params.alpha_m_b);
    return out;
}

Matrix cross_attention(const Matrix& queries, const Matrix& memory, const BlockParams& params, Matrix* weights) {
    const BlockDims& d = params.dims;
    require(queries.cols() == d.query_in(), "cross_attention: query width mismatch");
    if (memory.rows() == 0) {
        if (weights) *weights = Matrix(queries.rows(), 0);
        return Matrix::Zero(queries.rows(), d.hidden);
    }
    require(memory.cols() == d.memory, "cross_attention: memory width mismatch");
    const Matrix q = queries * params.w_q;
    const Matrix k = memory * params.w_k;
    const Matrix v = memory * params.w_v;
    const Matrix a = softmax_rows(q * k.transpose() / std::sqrt(static_cast<double>(d.attn)));
    if (weights) *weights = a;
    return (a * v) * params.w_o;
}

Matrix memory_block_forward(const BlockInputs& in, const BlockParams& params, BlockCache* cache) {
    check_inputs(in, params.dims);
    BlockCache local;
    BlockCache& c = cache ? *cache : local;
    c = BlockCache{};
    const BlockDims& d = params.dims;
    const Eigen::Index n = in.hidden.rows();

    c.x.resize(n, d.query_in());
    c.x << in.hidden, in.camera;
    RowNorm xn = normalize_rows(c.x, params.eps);
    c.x_hat = std::move(xn.hat);
    c.x_inv_std = std::move(xn.inv_std);
    c.gamma_h = regress(in.time, params.gamma_h_w, params.gamma_h_b);
    c.beta_h = regress(in.time, params.beta_h_w, params.beta_h_b);
    c.gamma_m = regress(in.time, params.gamma_m_w, params.gamma_m_b);
    c.beta_m = regress(in.time, params.beta_m_w, params.beta_m_b);
    c.alpha_h = regress(in.time, params.alpha_h_w, params.alpha_h_b);
    c.alpha_m = regress(in.time, params.alpha_m_w, params.alpha_m_b);
    c.h_norm = scale_shift(c.x_hat, c.gamma_h, c.beta_h);

    if (in.memory.rows() > 0) {
        RowNorm mn = normalize_rows(in.memory, params.eps);
        c.m_hat = std::move(mn.hat);
        c.m_inv_std = std::move(mn.inv_std);
        c.m_norm = scale_shift(c.m_hat, c.gamma_m, c.beta_m);
        c.q = c.h_norm * params.w_q;
        c.k = c.m_norm * params.w_k;
        c.v = c.m_norm * params.w_v;
        c.attn = softmax_rows(c.q * c.k.transpose() / std::sqrt(static_cast<double>(d.attn)));
        c.o = c.attn * c.v;
        c.attn_out = c.o * params.w_o;
    } else {
        c.attn_out = Matrix::Zero(n, d.hidden);
    }

    c.h1 = in.hidden + (c.attn_out.array().rowwise() * c.alpha_m.array()).matrix();
    RowNorm zn = normalize_rows(c.h1, params.eps);
    c.z_hat = std::move(zn.hat);
    c.z_inv_std = std::move(zn.inv_std);
    c.z = (c.z_hat.array().rowwise() * params.ln2_gain.row(0).array()).matrix();
    c.z.rowwise() += params.ln2_bias.row(0);
    c.u = c.z * params.ff1_w;
    c.u.rowwise() += params.ff1_b.row(0);
    c.g = c.u.unaryExpr([](double x) { return gelu(x); });
    c.f = c.g * params.ff2_w;
    c.f.rowwise() += params.ff2_b.row(0);
    c.out = c.h1 + (c.f.array().rowwise() * c.alpha_h.array()).matrix();

    c.inputs = in;
    c.param_fingerprint = params.fingerprint();
    c.valid = true;
    return c.out;
}

BlockGradients memory_block_backward(const Matrix& upstream, const BlockCache& c, const BlockParams& params) {
    if (!c.valid) throw Error("memory_block_backward: no forward cache");
    if (c.param_fingerprint != params.fingerprint())
        throw Error("memory_block_backward: stale cache (parameters changed since forward)");
    require(upstream.rows() == c.out.rows() && upstream.cols() == c.out.cols(),
            "memory_block_backward: upstream gradient shape mismatch");

    const BlockDims& d = params.dims;
    BlockGradients g;
    g.params = BlockParams::zeros(d);
    g.params.eps = params.eps;
    BlockParams& gp = g.params;
    const RowVector& t = c.inputs.time;
    // r = t W + b
    auto regress_backward = [&](const RowVector& dr, const Matrix& w, Matrix& dw, Matrix& db) {
        dw += t.transpose() * dr;
        db += dr;
        g.time += dr * w.transpose();
    };
    g.time = RowVector::Zero(d.time);

    // out = h1 + f * alpha_h
    Matrix d_h1 = upstream;
    const Matrix d_f = upstream.array().rowwise() * c.alpha_h.array();
    regress_backward(upstream.cwiseProduct(c.f).colwise().sum(), params.alpha_h_w, gp.alpha_h_w, gp.alpha_h_b);

    // f = gelu(u) ff2 + b
    gp.ff2_w = c.g.transpose() * d_f;
    gp.ff2_b = d_f.colwise().sum();
    const Matrix d_g = d_f * params.ff2_w.transpose();
    const Matrix d_u = d_g.cwiseProduct(c.u.unaryExpr([](double x) { return gelu_derivative(x); }));
    gp.ff1_w = c.z.transpose() * d_u;
    gp.ff1_b = d_u.colwise().sum();
    const Matrix d_z = d_u * params.ff1_w.transpose();
    gp.ln2_gain = d_z.cwiseProduct(c.z_hat).colwise().sum();
    gp.ln2_bias = d_z.colwise().sum();
    const Matrix d_z_hat = d_z.array().rowwise() * params.ln2_gain.row(0).array();
    d_h1 += normalize_rows_backward(d_z_hat, c.z_hat, c.z_inv_std);

    // h1 = hidden + attn_out * alpha_m
    g.hidden = d_h1;
    regress_backward(d_h1.cwiseProduct(c.attn_out).colwise().sum(), params.alpha_m_w, gp.alpha_m_w, gp.alpha_m_b);
    g.camera = Matrix::Zero(c.inputs.camera.rows(), d.camera);
    g.memory = Matrix::Zero(c.inputs.memory.rows(), c.inputs.memory.cols());
    if (c.inputs.memory.rows() == 0) return g;

    const Matrix d_attn_out = d_h1.array().rowwise() * c.alpha_m.array();
    gp.w_o = c.o.transpose() * d_attn_out;
    const Matrix d_o = d_attn_out * params.w_o.transpose();
    const Matrix d_a = d_o * c.v.transpose();
    const Matrix d_v = c.attn.transpose() * d_o;
    const Eigen::VectorXd row_dot = d_a.cwiseProduct(c.attn).rowwise().sum();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d.attn));
    const Matrix d_s = (c.attn.array() * (d_a.colwise() - row_dot).array()).matrix() * inv_sqrt;
    const Matrix d_q = d_s * c.k;
    const Matrix d_k = d_s.transpose() * c.q;

    gp.w_q = c.h_norm.transpose() * d_q;
    gp.w_k = c.m_norm.transpose() * d_k;
    gp.w_v = c.m_norm.transpose() * d_v;
    const Matrix d_h_norm = d_q * params.w_q.transpose();
    const Matrix d_m_norm = d_k * params.w_k.transpose() + d_v * params.w_v.transpose();

    // video stream adaptive norm
    regress_backward(d_h_norm.cwiseProduct(c.x_hat).colwise().sum(), params.gamma_h_w, gp.gamma_h_w, gp.gamma_h_b);
    regress_backward(d_h_norm.colwise().sum(), params.beta_h_w, gp.beta_h_w, gp.beta_h_b);
    const Matrix d_x_hat = d_h_norm.array().rowwise() * (1.0 + c.gamma_h.array());
    const Matrix d_x = normalize_rows_backward(d_x_hat, c.x_hat, c.x_inv_std);
    g.hidden += d_x.leftCols(d.hidden);
    g.camera = d_x.rightCols(d.camera);

    // memory stream adaptive norm
    regress_backward(d_m_norm.cwiseProduct(c.m_hat).colwise().sum(), params.gamma_m_w, gp.gamma_m_w, gp.gamma_m_b);
    regress_backward(d_m_norm.colwise().sum(), params.beta_m_w, gp.beta_m_w, gp.beta_m_b);
    const Matrix d_m_hat = d_m_norm.array().rowwise() * (1.0 + c.gamma_m.array());
    g.memory = normalize_rows_backward(d_m_hat, c.m_hat, c.m_inv_std);
    return g;
}

}  // namespace pmem
