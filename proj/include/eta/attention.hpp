#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

#include "eta/errors.hpp"
#include "eta/matrix.hpp"
#include "eta/retrieval.hpp"

namespace eta {

// Multi-head target attention: the target item is the query, behavior items
// are keys and values. Heads are concatenated and projected by w_o.
struct AttentionParams {
    std::size_t heads = 1;
    std::size_t d = 0;
    std::size_t d_k = 0;
    std::size_t d_v = 0;
    std::vector<Matrix> w_q, w_k, w_v;  // each d x d_k (or d x d_v)
    Matrix w_o;                         // (heads*d_v) x d

    static AttentionParams init(std::size_t heads, std::size_t d, std::size_t d_k,
                                std::size_t d_v, Rng& rng, double scale,
                                double vo_scale = -1.0) {
        if (vo_scale < 0.0) vo_scale = scale;
        if (heads == 0 || d == 0 || d_k == 0 || d_v == 0)
            throw ParamError("AttentionParams: all dims must be >= 1");
        AttentionParams p;
        p.heads = heads;
        p.d = d;
        p.d_k = d_k;
        p.d_v = d_v;
        for (std::size_t i = 0; i < heads; ++i) {
            // W_Q and W_K start tied: logits begin as e_t (W W^T) e_s with a
            // PSD W W^T, so attention respects raw embedding similarity from
            // the first step instead of a random bilinear form. The two
            // matrices are trained independently afterwards.
            p.w_q.push_back(Matrix::gaussian(d, d_k, rng, scale));
            p.w_k.push_back(p.w_q.back());
            p.w_v.push_back(Matrix::gaussian(d, d_v, rng, vo_scale));
        }
        p.w_o = Matrix::gaussian(heads * d_v, d, rng, vo_scale);
        return p;
    }
};

// Gradient buffers shape-congruent with AttentionParams.
struct AttentionGrads {
    std::vector<Matrix> w_q, w_k, w_v;
    Matrix w_o;

    static AttentionGrads zeros_like(const AttentionParams& p) {
        AttentionGrads g;
        for (std::size_t i = 0; i < p.heads; ++i) {
            g.w_q.emplace_back(p.d, p.d_k);
            g.w_k.emplace_back(p.d, p.d_k);
            g.w_v.emplace_back(p.d, p.d_v);
        }
        g.w_o = Matrix(p.heads * p.d_v, p.d);
        return g;
    }
};

// Forward intermediates kept for the backward pass.
struct AttentionCache {
    Matrix e_t;                   // 1 x d
    Matrix e_s;                   // n x d
    std::vector<Matrix> q;        // 1 x d_k per head
    std::vector<Matrix> k;        // n x d_k per head
    std::vector<Matrix> v;        // n x d_v per head
    std::vector<Matrix> weights;  // 1 x n per head (softmax output)
    Matrix concat;                // 1 x heads*d_v
};

inline Matrix target_attention_forward(const Matrix& e_t, const Matrix& e_s,
                                       const AttentionParams& p,
                                       AttentionCache* cache = nullptr) {
    if (e_s.rows == 0) throw ShapeError("target_attention: empty key sequence");
    if (e_t.rows != 1 || e_t.cols != p.d || e_s.cols != p.d)
        throw ShapeError("target_attention: shape mismatch, E_t " + shape_str(e_t) +
                         ", E_s " + shape_str(e_s) + ", d=" + std::to_string(p.d));
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_k));
    Matrix concat(1, p.heads * p.d_v);
    AttentionCache local;
    AttentionCache& c = cache ? *cache : local;
    c.e_t = e_t;
    c.e_s = e_s;
    c.q.clear();
    c.k.clear();
    c.v.clear();
    c.weights.clear();
    for (std::size_t h = 0; h < p.heads; ++h) {
        Matrix q = matmul(e_t, p.w_q[h]);   // 1 x d_k
        Matrix k = matmul(e_s, p.w_k[h]);   // n x d_k
        Matrix v = matmul(e_s, p.w_v[h]);   // n x d_v
        Matrix logits = matmul_a_bt(q, k);  // 1 x n
        for (double& x : logits.data) x *= inv_sqrt_dk;
        Matrix w = softmax_rows(logits);    // 1 x n
        Matrix head = matmul(w, v);         // 1 x d_v
        std::copy(head.data.begin(), head.data.end(),
                  concat.data.begin() + static_cast<std::ptrdiff_t>(h * p.d_v));
        if (cache) {
            c.q.push_back(std::move(q));
            c.k.push_back(std::move(k));
            c.v.push_back(std::move(v));
            c.weights.push_back(std::move(w));
        }
    }
    if (cache) c.concat = concat;
    return matmul(concat, p.w_o);  // 1 x d
}

// Accumulates parameter gradients into `g` and input gradients into
// `d_e_t` (1 x d) and `d_e_s` (n x d), which must be pre-sized.
inline void target_attention_backward(const Matrix& grad_out, const AttentionCache& c,
                                      const AttentionParams& p, AttentionGrads& g,
                                      Matrix& d_e_t, Matrix& d_e_s) {
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_k));
    // concat -> output projection
    Matrix d_concat = matmul_a_bt(grad_out, p.w_o);        // 1 x heads*d_v
    axpy(g.w_o, 1.0, matmul_at_b(c.concat, grad_out));     // (h*d_v) x d
    for (std::size_t h = 0; h < p.heads; ++h) {
        Matrix d_head(1, p.d_v);
        std::copy(d_concat.data.begin() + static_cast<std::ptrdiff_t>(h * p.d_v),
                  d_concat.data.begin() + static_cast<std::ptrdiff_t>((h + 1) * p.d_v),
                  d_head.data.begin());
        // head = w * v
        Matrix d_w = matmul_a_bt(d_head, c.v[h]);          // 1 x n
        Matrix d_v = matmul_at_b(c.weights[h], d_head);    // n x d_v
        // w = softmax(logits), logits = q k^T / sqrt(d_k)
        Matrix d_logits = softmax_rows_backward(c.weights[h], d_w);
        for (double& x : d_logits.data) x *= inv_sqrt_dk;
        Matrix d_q = matmul(d_logits, c.k[h]);             // 1 x d_k
        Matrix d_k = matmul_at_b(d_logits, c.q[h]);        // n x d_k
        // projections
        axpy(d_e_t, 1.0, matmul_a_bt(d_q, p.w_q[h]));
        axpy(g.w_q[h], 1.0, matmul_at_b(c.e_t, d_q));
        axpy(d_e_s, 1.0, matmul_a_bt(d_k, p.w_k[h]));
        axpy(g.w_k[h], 1.0, matmul_at_b(c.e_s, d_k));
        axpy(d_e_s, 1.0, matmul_a_bt(d_v, p.w_v[h]));
        axpy(g.w_v[h], 1.0, matmul_at_b(c.e_s, d_v));
    }
}

using EngineFn = std::function<RetrievalResult(const RetrievalRequest&)>;

// Long-term Interest Extraction Unit state for the backward pass. When the
// engine returns nothing (hard baseline with no category match) the learned
// no-context vector is emitted instead and `selected` stays empty.
struct LtiCache {
    std::vector<std::size_t> selected;  // original positions, ascending
    AttentionCache attention;
    bool used_no_context = false;
};

// Top-k retrieval over the long sequence followed by target attention on the
// selected rows. Selection is gradient-free; gradients flow only into the
// selected rows and the attention parameters.
inline Matrix lti_forward(const Matrix& e_t, const Matrix& e_s_long,
                          const std::vector<std::int64_t>& categories,
                          std::int64_t target_category, std::size_t k,
                          const EngineFn& engine, const AttentionParams& p,
                          const Matrix& no_context, LtiCache* cache = nullptr) {
    if (k == 0) throw ParamError("lti: k must be >= 1");
    LtiCache local;
    LtiCache& c = cache ? *cache : local;
    c.selected.clear();
    c.used_no_context = false;

    if (e_s_long.rows > 0) {
        RetrievalRequest req;
        req.target_embedding.assign(e_t.data.begin(), e_t.data.end());
        req.target_category = target_category;
        req.sequence_embeddings = &e_s_long;
        req.sequence_categories = categories;
        req.k = k;
        RetrievalResult res = engine(req);
        c.selected = res.indices;
        std::sort(c.selected.begin(), c.selected.end());  // original sequence order
    }
    if (c.selected.empty()) {
        c.used_no_context = true;
        return no_context;
    }
    Matrix gathered(c.selected.size(), e_s_long.cols);
    for (std::size_t i = 0; i < c.selected.size(); ++i)
        std::copy_n(e_s_long.row_ptr(c.selected[i]), e_s_long.cols, gathered.row_ptr(i));
    return target_attention_forward(e_t, gathered, p, cache ? &c.attention : nullptr);
}

// Backward counterpart. `d_e_s_long` must be L x d; rows the engine did not
// select receive exactly zero gradient. If the no-context vector was used,
// its gradient is accumulated into `d_no_context` instead.
inline void lti_backward(const Matrix& grad_out, const LtiCache& c, const AttentionParams& p,
                         AttentionGrads& g, Matrix& d_e_t, Matrix& d_e_s_long,
                         Matrix& d_no_context) {
    if (c.used_no_context) {
        axpy(d_no_context, 1.0, grad_out);
        return;
    }
    Matrix d_gathered(c.selected.size(), d_e_s_long.cols);
    target_attention_backward(grad_out, c.attention, p, g, d_e_t, d_gathered);
    for (std::size_t i = 0; i < c.selected.size(); ++i)
        for (std::size_t j = 0; j < d_e_s_long.cols; ++j)
            d_e_s_long.at(c.selected[i], j) += d_gathered.at(i, j);
}

}  // namespace eta
