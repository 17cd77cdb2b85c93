#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eta/attention.hpp"
#include "eta/errors.hpp"
#include "eta/hashing.hpp"
#include "eta/matrix.hpp"
#include "eta/retrieval.hpp"
#include "eta/rng.hpp"

namespace eta {

struct EmbeddingTable {
    std::size_t vocab = 0;
    std::size_t d = 0;
    Matrix rows;  // vocab x d
    std::string name;

    EmbeddingTable() = default;
    EmbeddingTable(std::size_t vocab_, std::size_t d_, std::string name_)
        : vocab(vocab_), d(d_), rows(vocab_, d_), name(std::move(name_)) {}

    const double* lookup(std::int64_t id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab)
            throw ParamError("embedding lookup out of range in table \"" + name +
                             "\": id " + std::to_string(id) + ", vocab " + std::to_string(vocab));
        return rows.row_ptr(static_cast<std::size_t>(id));
    }
};

// One labeled training/eval sample. Sequences are chronologically ordered,
// oldest first; long_seq is strictly older than short_seq.
struct Instance {
    std::int64_t user_id = 0;
    std::int64_t target_item_id = 0;
    std::int64_t target_category_id = 0;
    std::int64_t context_bucket_id = 0;
    std::vector<std::int64_t> short_items, short_cats;
    std::vector<std::int64_t> long_items, long_cats;
    int label = 0;
    std::int64_t timestamp = 0;
};

enum class Variant { ShortOnly, LongAvg, Eta, EtaFrozen, ExactTopk, FullTa, Hard };

inline Variant parse_variant(const std::string& name) {
    if (name == "short-only") return Variant::ShortOnly;
    if (name == "long-avg") return Variant::LongAvg;
    if (name == "eta") return Variant::Eta;
    if (name == "eta-frozen") return Variant::EtaFrozen;
    if (name == "exact-topk") return Variant::ExactTopk;
    if (name == "full-ta") return Variant::FullTa;
    if (name == "hard") return Variant::Hard;
    throw ConfigError("unknown variant: \"" + name + "\"");
}

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::ShortOnly: return "short-only";
        case Variant::LongAvg: return "long-avg";
        case Variant::Eta: return "eta";
        case Variant::EtaFrozen: return "eta-frozen";
        case Variant::ExactTopk: return "exact-topk";
        case Variant::FullTa: return "full-ta";
        case Variant::Hard: return "hard";
    }
    throw ConfigError("unknown variant enum value");
}

struct ModelConfig {
    std::size_t d = 16;
    std::size_t S = 8;       // short sequence length cap
    std::size_t L = 128;     // long sequence length cap
    std::size_t k = 16;      // retrieved items
    std::size_t m = 64;      // fingerprint bits
    std::size_t heads = 2;
    std::vector<std::size_t> mlp_widths = {64, 32};
    std::string variant = "eta";
    std::uint64_t seed = 1;
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t item_vocab = 10000;
    std::size_t category_vocab = 200;
    std::size_t user_vocab = 2000;
    std::size_t context_vocab = 1;

    void validate() const {
        if (d == 0 || S == 0 || L == 0 || k == 0 || m == 0 || heads == 0)
            throw ConfigError("model config: all dims must be >= 1");
        if (k > L) throw ConfigError("model config: k must be <= L");
        if (d % heads != 0) throw ConfigError("model config: d must be divisible by heads");
        if (mlp_widths.empty()) throw ConfigError("model config: mlp_widths must be non-empty");
        if (batch_size == 0) throw ConfigError("model config: batch_size must be >= 1");
    }
};

// Every trainable tensor. Gradients reuse this same structure (zeros_like),
// so Adam/checkpoints/grad-checks all walk tensors through for_each_tensor.
struct ModelParams {
    EmbeddingTable item, category, user, context;
    AttentionParams short_attn, long_attn;
    std::vector<Matrix> mlp_w, mlp_b;
    Matrix no_context;  // 1 x d, emitted when a branch has nothing to attend to

    static ModelParams init(const ModelConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.seed);
        ModelParams p;
        p.item = EmbeddingTable(cfg.item_vocab, cfg.d, "item");
        p.category = EmbeddingTable(cfg.category_vocab, cfg.d, "category");
        p.user = EmbeddingTable(cfg.user_vocab, cfg.d, "user");
        p.context = EmbeddingTable(cfg.context_vocab, cfg.d, "context");
        const double item_scale = 0.1, attr_scale = 0.1;
        p.item.rows = Matrix::gaussian(p.item.rows.rows, p.item.rows.cols, rng, item_scale);
        for (Matrix* m : {&p.category.rows, &p.user.rows, &p.context.rows}) {
            Matrix g = Matrix::gaussian(m->rows, m->cols, rng, attr_scale);
            *m = std::move(g);
        }
        std::size_t dh = cfg.d / cfg.heads;
        // Query/key projections start large so early attention is selective
        // rather than uniform over long sequences; value/output projections
        // stay small to keep feature magnitudes in the MLP's linear regime.
        const double qk_scale = 2.0;
        const double vo_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));
        p.short_attn = AttentionParams::init(cfg.heads, cfg.d, dh, dh, rng, qk_scale, vo_scale);
        p.long_attn = AttentionParams::init(cfg.heads, cfg.d, dh, dh, rng, qk_scale, vo_scale);
        std::size_t in_w = 5 * cfg.d;
        for (std::size_t w : cfg.mlp_widths) {
            p.mlp_w.push_back(Matrix::gaussian(in_w, w, rng,
                                               std::sqrt(2.0 / static_cast<double>(in_w))));
            p.mlp_b.emplace_back(1, w);
            in_w = w;
        }
        p.mlp_w.push_back(Matrix::gaussian(in_w, 1, rng,
                                           std::sqrt(2.0 / static_cast<double>(in_w))));
        p.mlp_b.emplace_back(1, 1);
        p.no_context = Matrix(1, cfg.d);
        return p;
    }

    static ModelParams zeros_like(const ModelParams& o) {
        ModelParams p;
        p.item = EmbeddingTable(o.item.vocab, o.item.d, o.item.name);
        p.category = EmbeddingTable(o.category.vocab, o.category.d, o.category.name);
        p.user = EmbeddingTable(o.user.vocab, o.user.d, o.user.name);
        p.context = EmbeddingTable(o.context.vocab, o.context.d, o.context.name);
        p.short_attn = o.short_attn;
        p.long_attn = o.long_attn;
        auto zero_attn = [](AttentionParams& a) {
            for (auto& m : a.w_q) m.zero();
            for (auto& m : a.w_k) m.zero();
            for (auto& m : a.w_v) m.zero();
            a.w_o.zero();
        };
        zero_attn(p.short_attn);
        zero_attn(p.long_attn);
        for (const Matrix& m : o.mlp_w) p.mlp_w.emplace_back(m.rows, m.cols);
        for (const Matrix& m : o.mlp_b) p.mlp_b.emplace_back(m.rows, m.cols);
        p.no_context = Matrix(o.no_context.rows, o.no_context.cols);
        return p;
    }

    template <class Fn>
    void for_each_tensor(Fn&& fn) {
        fn("item_embedding", item.rows);
        fn("category_embedding", category.rows);
        fn("user_embedding", user.rows);
        fn("context_embedding", context.rows);
        auto walk_attn = [&](const std::string& prefix, AttentionParams& a) {
            for (std::size_t i = 0; i < a.w_q.size(); ++i)
                fn(prefix + ".w_q." + std::to_string(i), a.w_q[i]);
            for (std::size_t i = 0; i < a.w_k.size(); ++i)
                fn(prefix + ".w_k." + std::to_string(i), a.w_k[i]);
            for (std::size_t i = 0; i < a.w_v.size(); ++i)
                fn(prefix + ".w_v." + std::to_string(i), a.w_v[i]);
            fn(prefix + ".w_o", a.w_o);
        };
        walk_attn("short", short_attn);
        walk_attn("long", long_attn);
        for (std::size_t i = 0; i < mlp_w.size(); ++i)
            fn("mlp.w." + std::to_string(i), mlp_w[i]);
        for (std::size_t i = 0; i < mlp_b.size(); ++i)
            fn("mlp.b." + std::to_string(i), mlp_b[i]);
        fn("no_context", no_context);
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for_each_tensor([&](const std::string&, Matrix& m) { n += m.size(); });
        return n;
    }
};

using Gradients = ModelParams;

// Vocab-level fingerprint snapshot for the eta-frozen variant: one
// fingerprint per item id, hashed from item+category embeddings at freeze
// time and never refreshed.
struct FrozenVocabFingerprints {
    std::vector<Fingerprint> by_item;

    static FrozenVocabFingerprints build(const ModelParams& params,
                                         const std::vector<std::int64_t>& item_categories,
                                         const HashPlanes& planes) {
        if (item_categories.size() != params.item.vocab)
            throw ShapeError("frozen fingerprints: item->category map size != item vocab");
        Matrix reps(params.item.vocab, params.item.d);
        for (std::size_t i = 0; i < params.item.vocab; ++i) {
            const double* ie = params.item.rows.row_ptr(i);
            const double* ce = params.category.lookup(item_categories[i]);
            double* out = reps.row_ptr(i);
            for (std::size_t j = 0; j < params.item.d; ++j) out[j] = ie[j] + ce[j];
        }
        FrozenVocabFingerprints f;
        f.by_item = fingerprint_batch(reps, planes);
        return f;
    }
};

struct ForwardCache {
    Matrix e_t, e_u, e_c;        // 1 x d each
    Matrix e_short;              // s x d
    Matrix e_long;               // l x d
    AttentionCache short_cache;
    bool short_empty = false;
    LtiCache lti_cache;
    bool long_avg_empty = false;
    Matrix full_ta_cacheless;    // unused marker
    AttentionCache full_ta_cache;
    bool full_ta_empty = false;
    Matrix concat;               // 1 x 5d
    std::vector<Matrix> mlp_pre;   // pre-activation per layer
    std::vector<Matrix> mlp_post;  // post-activation per layer (input to next)
    double logit = 0.0;
    double p = 0.0;
};

namespace detail {

inline Matrix seq_embeddings(const ModelParams& params,
                             const std::vector<std::int64_t>& items,
                             const std::vector<std::int64_t>& cats) {
    if (items.size() != cats.size())
        throw ShapeError("sequence item/category id lists differ in length");
    Matrix out(items.size(), params.item.d);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double* ie = params.item.lookup(items[i]);
        const double* ce = params.category.lookup(cats[i]);
        double* o = out.row_ptr(i);
        for (std::size_t j = 0; j < params.item.d; ++j) o[j] = ie[j] + ce[j];
    }
    return out;
}

inline void scatter_seq_grad(Gradients& grads, const std::vector<std::int64_t>& items,
                             const std::vector<std::int64_t>& cats, const Matrix& d_seq) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        double* gi = grads.item.rows.row_ptr(static_cast<std::size_t>(items[i]));
        double* gc = grads.category.rows.row_ptr(static_cast<std::size_t>(cats[i]));
        const double* d = d_seq.row_ptr(i);
        for (std::size_t j = 0; j < d_seq.cols; ++j) {
            gi[j] += d[j];
            gc[j] += d[j];
        }
    }
}

}  // namespace detail

// Runtime wiring shared by forward/backward: which variant, the hash planes
// for the eta engines, and the frozen snapshot for eta-frozen.
struct ModelRuntime {
    Variant variant = Variant::Eta;
    const HashPlanes* planes = nullptr;
    const FrozenVocabFingerprints* frozen = nullptr;

    EngineFn make_engine(const Instance& inst) const {
        switch (variant) {
            case Variant::Eta:
                return [this](const RetrievalRequest& req) {
                    return topk_hamming(req, *planes);
                };
            case Variant::EtaFrozen:
                // stale index, fresh query: sequence fingerprints come from the
                // step-0 snapshot while the target is hashed from its current
                // embedding, like an offline-built index serving online queries
                return [this, &inst](const RetrievalRequest& req) {
                    FingerprintStore store;
                    store.fingerprints.reserve(inst.long_items.size());
                    for (std::int64_t id : inst.long_items)
                        store.fingerprints.push_back(
                            frozen->by_item[static_cast<std::size_t>(id)]);
                    return topk_hamming(req, *planes, &store);
                };
            case Variant::ExactTopk:
                return [](const RetrievalRequest& req) { return topk_exact(req); };
            case Variant::Hard:
                return [](const RetrievalRequest& req) { return topk_hard(req); };
            default:
                throw ConfigError("variant has no retrieval engine");
        }
    }
};

inline double model_forward(const ModelParams& params, const ModelConfig& cfg,
                            const Instance& inst, const ModelRuntime& rt,
                            ForwardCache* cache = nullptr) {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;

    // embeddings
    c.e_t = Matrix(1, cfg.d);
    {
        const double* ie = params.item.lookup(inst.target_item_id);
        const double* ce = params.category.lookup(inst.target_category_id);
        for (std::size_t j = 0; j < cfg.d; ++j) c.e_t.data[j] = ie[j] + ce[j];
    }
    c.e_u = Matrix(1, cfg.d);
    std::copy_n(params.user.lookup(inst.user_id), cfg.d, c.e_u.data.begin());
    c.e_c = Matrix(1, cfg.d);
    std::copy_n(params.context.lookup(inst.context_bucket_id), cfg.d, c.e_c.data.begin());

    // short branch: full target attention over recent items
    c.e_short = detail::seq_embeddings(params, inst.short_items, inst.short_cats);
    Matrix short_feat;
    if (c.e_short.rows == 0) {
        c.short_empty = true;
        short_feat = params.no_context;
    } else {
        c.short_empty = false;
        short_feat = target_attention_forward(c.e_t, c.e_short, params.short_attn,
                                              cache ? &c.short_cache : nullptr);
    }

    // long branch per variant
    Matrix long_feat(1, cfg.d);
    c.long_avg_empty = false;
    c.full_ta_empty = false;
    switch (rt.variant) {
        case Variant::ShortOnly:
            c.e_long = Matrix(0, cfg.d);
            long_feat = params.no_context;
            break;
        case Variant::LongAvg: {
            c.e_long = detail::seq_embeddings(params, inst.long_items, inst.long_cats);
            if (c.e_long.rows == 0) {
                c.long_avg_empty = true;
                long_feat = params.no_context;
            } else {
                for (std::size_t i = 0; i < c.e_long.rows; ++i)
                    for (std::size_t j = 0; j < cfg.d; ++j)
                        long_feat.data[j] += c.e_long.at(i, j);
                for (double& v : long_feat.data) v /= static_cast<double>(c.e_long.rows);
            }
            break;
        }
        case Variant::FullTa: {
            c.e_long = detail::seq_embeddings(params, inst.long_items, inst.long_cats);
            if (c.e_long.rows == 0) {
                c.full_ta_empty = true;
                long_feat = params.no_context;
            } else {
                long_feat = target_attention_forward(c.e_t, c.e_long, params.long_attn,
                                                     cache ? &c.full_ta_cache : nullptr);
            }
            break;
        }
        default: {
            c.e_long = detail::seq_embeddings(params, inst.long_items, inst.long_cats);
            long_feat = lti_forward(c.e_t, c.e_long, inst.long_cats, inst.target_category_id,
                                    cfg.k, rt.make_engine(inst), params.long_attn,
                                    params.no_context, &c.lti_cache);
            break;
        }
    }

    // concat [long, short, e_u, e_c, e_t] -> MLP -> sigmoid
    c.concat = Matrix(1, 5 * cfg.d);
    auto put = [&](std::size_t slot, const Matrix& v) {
        std::copy_n(v.data.begin(), cfg.d, c.concat.data.begin() +
                                               static_cast<std::ptrdiff_t>(slot * cfg.d));
    };
    put(0, long_feat);
    put(1, short_feat);
    put(2, c.e_u);
    put(3, c.e_c);
    put(4, c.e_t);

    c.mlp_pre.clear();
    c.mlp_post.clear();
    Matrix x = c.concat;
    for (std::size_t layer = 0; layer < params.mlp_w.size(); ++layer) {
        Matrix z = matmul(x, params.mlp_w[layer]);
        axpy(z, 1.0, params.mlp_b[layer]);
        c.mlp_pre.push_back(z);
        if (layer + 1 < params.mlp_w.size()) {
            for (double& v : z.data) v = std::max(0.0, v);  // ReLU
            c.mlp_post.push_back(z);
            x = std::move(z);
        }
    }
    c.logit = c.mlp_pre.back().data[0];
    c.p = 1.0 / (1.0 + std::exp(-c.logit));
    if (!std::isfinite(c.p)) throw NumericError("model forward produced non-finite output");
    return c.p;
}

// Backward through the whole model given d(loss)/d(logit). Accumulates into
// `grads`, which must be zeros_like(params)-shaped (not necessarily zeroed).
inline void model_backward(const ModelParams& params, const ModelConfig& cfg,
                           const Instance& inst, const ModelRuntime& rt,
                           const ForwardCache& c, double d_logit, Gradients& grads) {
    // MLP backward
    Matrix d_out(1, 1);
    d_out.data[0] = d_logit;
    Matrix d_x;
    for (std::size_t layer = params.mlp_w.size(); layer-- > 0;) {
        const Matrix& input = (layer == 0) ? c.concat : c.mlp_post[layer - 1];
        axpy(grads.mlp_w[layer], 1.0, matmul_at_b(input, d_out));
        axpy(grads.mlp_b[layer], 1.0, d_out);
        d_x = matmul_a_bt(d_out, params.mlp_w[layer]);
        if (layer > 0) {
            // ReLU mask from pre-activations
            const Matrix& pre = c.mlp_pre[layer - 1];
            for (std::size_t i = 0; i < d_x.size(); ++i)
                if (pre.data[i] <= 0.0) d_x.data[i] = 0.0;
            d_out = std::move(d_x);
        }
    }
    // split concat gradient
    auto slice = [&](std::size_t slot) {
        Matrix v(1, cfg.d);
        std::copy_n(d_x.data.begin() + static_cast<std::ptrdiff_t>(slot * cfg.d), cfg.d,
                    v.data.begin());
        return v;
    };
    Matrix d_long = slice(0);
    Matrix d_short = slice(1);
    Matrix d_eu = slice(2);
    Matrix d_ec = slice(3);
    Matrix d_et = slice(4);

    // short branch
    if (c.short_empty) {
        axpy(grads.no_context, 1.0, d_short);
    } else {
        Matrix d_e_short(c.e_short.rows, cfg.d);
        AttentionGrads ag = AttentionGrads::zeros_like(params.short_attn);
        target_attention_backward(d_short, c.short_cache, params.short_attn, ag, d_et,
                                  d_e_short);
        for (std::size_t i = 0; i < params.short_attn.heads; ++i) {
            axpy(grads.short_attn.w_q[i], 1.0, ag.w_q[i]);
            axpy(grads.short_attn.w_k[i], 1.0, ag.w_k[i]);
            axpy(grads.short_attn.w_v[i], 1.0, ag.w_v[i]);
        }
        axpy(grads.short_attn.w_o, 1.0, ag.w_o);
        detail::scatter_seq_grad(grads, inst.short_items, inst.short_cats, d_e_short);
    }

    // long branch
    switch (rt.variant) {
        case Variant::ShortOnly:
            axpy(grads.no_context, 1.0, d_long);
            break;
        case Variant::LongAvg: {
            if (c.long_avg_empty) {
                axpy(grads.no_context, 1.0, d_long);
            } else {
                Matrix d_e_long(c.e_long.rows, cfg.d);
                double inv = 1.0 / static_cast<double>(c.e_long.rows);
                for (std::size_t i = 0; i < c.e_long.rows; ++i)
                    for (std::size_t j = 0; j < cfg.d; ++j)
                        d_e_long.at(i, j) = d_long.data[j] * inv;
                detail::scatter_seq_grad(grads, inst.long_items, inst.long_cats, d_e_long);
            }
            break;
        }
        case Variant::FullTa: {
            if (c.full_ta_empty) {
                axpy(grads.no_context, 1.0, d_long);
            } else {
                Matrix d_e_long(c.e_long.rows, cfg.d);
                AttentionGrads ag = AttentionGrads::zeros_like(params.long_attn);
                target_attention_backward(d_long, c.full_ta_cache, params.long_attn, ag, d_et,
                                          d_e_long);
                for (std::size_t i = 0; i < params.long_attn.heads; ++i) {
                    axpy(grads.long_attn.w_q[i], 1.0, ag.w_q[i]);
                    axpy(grads.long_attn.w_k[i], 1.0, ag.w_k[i]);
                    axpy(grads.long_attn.w_v[i], 1.0, ag.w_v[i]);
                }
                axpy(grads.long_attn.w_o, 1.0, ag.w_o);
                detail::scatter_seq_grad(grads, inst.long_items, inst.long_cats, d_e_long);
            }
            break;
        }
        default: {
            Matrix d_e_long(c.e_long.rows, cfg.d);
            AttentionGrads ag = AttentionGrads::zeros_like(params.long_attn);
            lti_backward(d_long, c.lti_cache, params.long_attn, ag, d_et, d_e_long,
                         grads.no_context);
            if (!c.lti_cache.used_no_context) {
                for (std::size_t i = 0; i < params.long_attn.heads; ++i) {
                    axpy(grads.long_attn.w_q[i], 1.0, ag.w_q[i]);
                    axpy(grads.long_attn.w_k[i], 1.0, ag.w_k[i]);
                    axpy(grads.long_attn.w_v[i], 1.0, ag.w_v[i]);
                }
                axpy(grads.long_attn.w_o, 1.0, ag.w_o);
                detail::scatter_seq_grad(grads, inst.long_items, inst.long_cats, d_e_long);
            }
            break;
        }
    }

    // direct features
    {
        double* gu = grads.user.rows.row_ptr(static_cast<std::size_t>(inst.user_id));
        double* gc = grads.context.rows.row_ptr(static_cast<std::size_t>(inst.context_bucket_id));
        for (std::size_t j = 0; j < cfg.d; ++j) {
            gu[j] += d_eu.data[j];
            gc[j] += d_ec.data[j];
        }
        // e_t = item[target] + category[target_cat]; d_et already holds the
        // concat-slot gradient plus both attention query gradients
        double* gi = grads.item.rows.row_ptr(static_cast<std::size_t>(inst.target_item_id));
        double* gcat =
            grads.category.rows.row_ptr(static_cast<std::size_t>(inst.target_category_id));
        for (std::size_t j = 0; j < cfg.d; ++j) {
            gi[j] += d_et.data[j];
            gcat[j] += d_et.data[j];
        }
    }
}

// Mean binary cross entropy with probabilities clamped to [1e-7, 1-1e-7].
inline double loss(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.size() != labels.size())
        throw ParamError("loss: probs and labels differ in length");
    if (probs.empty()) throw ParamError("loss: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = std::clamp(probs[i], 1e-7, 1.0 - 1e-7);
        total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.size());
}

struct AdamState {
    std::vector<Matrix> m, v;
    std::size_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(ModelParams& params) {
        AdamState s;
        params.for_each_tensor([&](const std::string&, Matrix& mat) {
            s.m.emplace_back(mat.rows, mat.cols);
            s.v.emplace_back(mat.rows, mat.cols);
        });
        return s;
    }
};

inline void adam_update(ModelParams& params, Gradients& grads, AdamState& state, double lr) {
    state.t += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    std::size_t idx = 0;
    std::vector<Matrix*> gptrs;
    grads.for_each_tensor([&](const std::string&, Matrix& g) { gptrs.push_back(&g); });
    params.for_each_tensor([&](const std::string&, Matrix& w) {
        Matrix& g = *gptrs[idx];
        Matrix& m = state.m[idx];
        Matrix& v = state.v[idx];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            w.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        ++idx;
    });
}

// One Adam step over a batch; returns mean batch loss. Gradients are
// recomputed from scratch (zeroed buffers) every call.
inline double train_step(ModelParams& params, const ModelConfig& cfg,
                         const std::vector<Instance>& batch, const ModelRuntime& rt,
                         AdamState& adam, Gradients& grad_buffer) {
    if (batch.empty()) throw ParamError("train_step: empty batch");
    grad_buffer.for_each_tensor([](const std::string&, Matrix& m) { m.zero(); });
    std::vector<double> probs;
    std::vector<int> labels;
    probs.reserve(batch.size());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const Instance& inst : batch) {
        ForwardCache cache;
        double p = model_forward(params, cfg, inst, rt, &cache);
        probs.push_back(p);
        labels.push_back(inst.label);
        double d_logit = (p - static_cast<double>(inst.label)) * inv_n;
        model_backward(params, cfg, inst, rt, cache, d_logit, grad_buffer);
    }
    double batch_loss = loss(probs, labels);
    if (!std::isfinite(batch_loss))
        throw NumericError("train_step: non-finite loss, training aborted");
    adam_update(params, grad_buffer, adam, cfg.learning_rate);
    return batch_loss;
}

}  // namespace eta
