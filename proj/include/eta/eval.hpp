#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "eta/errors.hpp"
#include "eta/hashing.hpp"
#include "eta/matrix.hpp"
#include "eta/retrieval.hpp"
#include "eta/rng.hpp"

namespace eta {

// AUC via rank-sum with average ranks for ties: the probability that a
// uniformly random positive outranks a random negative, ties counting 0.5.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ParamError("auc: scores and labels differ in length");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("auc: undefined for single-class labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]]) pos_rank_sum += avg_rank;
        i = j;
    }
    return (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// |approx ∩ exact| / |exact|
inline double recall_at_k(const RetrievalResult& approx, const RetrievalResult& exact) {
    if (exact.indices.empty()) throw MetricError("recall_at_k: empty exact result");
    std::unordered_set<std::size_t> truth(exact.indices.begin(), exact.indices.end());
    std::size_t hits = 0;
    for (std::size_t i : approx.indices) hits += truth.count(i);
    return static_cast<double>(hits) / static_cast<double>(exact.indices.size());
}

struct LatencyStats {
    double mean_ns = 0.0;
    double p50_ns = 0.0;
    double p95_ns = 0.0;
};

struct BenchRow {
    std::string engine;
    LatencyStats latency;
    double mean_recall = 1.0;  // vs exact; exact itself reports 1
};

struct BenchResult {
    std::size_t L = 0, B = 0, d = 0, m = 0, k = 0, trials = 0;
    std::uint64_t seed = 0;
    std::vector<BenchRow> rows;

    const BenchRow& row(const std::string& engine) const {
        for (const auto& r : rows)
            if (r.engine == engine) return r;
        throw ParamError("bench: no row for engine " + engine);
    }
};

namespace detail {

inline LatencyStats summarize(std::vector<double> ns) {
    LatencyStats s;
    if (ns.empty()) return s;
    s.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(ns.size());
    std::sort(ns.begin(), ns.end());
    s.p50_ns = ns[ns.size() / 2];
    s.p95_ns = ns[std::min(ns.size() - 1, ns.size() * 95 / 100)];
    return s;
}

}  // namespace detail

// Single-core latency/recall comparison of the three retrieval engines over
// `trials` independent requests of B targets against a length-L sequence.
// Sequence fingerprints are prepared outside the timed region: in serving
// they live alongside the embedding table and are looked up, not recomputed
// per query. The first 10% of trials are warmup and excluded.
inline BenchResult bench_retrieval(std::size_t L, std::size_t B, std::size_t d, std::size_t m,
                                   std::size_t k, std::size_t trials, std::uint64_t seed) {
    if (L == 0 || B == 0 || d == 0 || m == 0 || k == 0 || trials == 0)
        throw ParamError("bench_retrieval: all parameters must be >= 1");
    using clock = std::chrono::steady_clock;
    const std::size_t n_categories = 50;
    HashPlanes planes(d, m, seed ^ 0x5eedULL);
    Rng rng(seed);

    std::vector<double> ns_hamming, ns_exact, ns_hard;
    std::vector<double> recall_hamming_sum, recall_hard_sum;
    double rec_ham = 0.0, rec_hard = 0.0;
    std::size_t measured = 0;
    const std::size_t warmup = trials / 10;
    volatile std::size_t sink = 0;  // keep results observable

    for (std::size_t trial = 0; trial < trials + warmup; ++trial) {
        Matrix seq = Matrix::gaussian(L, d, rng);
        Matrix targets = Matrix::gaussian(B, d, rng);
        std::vector<std::int64_t> seq_cats(L), tgt_cats(B);
        for (auto& c : seq_cats) c = static_cast<std::int64_t>(rng.next_below(n_categories));
        for (auto& c : tgt_cats) c = static_cast<std::int64_t>(rng.next_below(n_categories));

        // fingerprints maintained with the embedding table; not timed
        std::vector<Fingerprint> seq_fps = fingerprint_batch(seq, planes);
        std::vector<Fingerprint> tgt_fps = fingerprint_batch(targets, planes);

        std::vector<RetrievalResult> exact_res(B), ham_res(B), hard_res(B);

        auto t0 = clock::now();
        for (std::size_t b = 0; b < B; ++b)
            ham_res[b] = topk_hamming_prepared(seq_fps, tgt_fps[b], k);
        auto t1 = clock::now();
        for (std::size_t b = 0; b < B; ++b) {
            RetrievalRequest req;
            req.target_embedding.assign(targets.row_ptr(b), targets.row_ptr(b) + d);
            req.sequence_embeddings = &seq;
            req.k = k;
            exact_res[b] = topk_exact(req);
        }
        auto t2 = clock::now();
        for (std::size_t b = 0; b < B; ++b) {
            RetrievalRequest req;
            req.target_embedding.assign(targets.row_ptr(b), targets.row_ptr(b) + d);
            req.target_category = tgt_cats[b];
            req.sequence_embeddings = &seq;
            req.sequence_categories = seq_cats;
            req.k = k;
            hard_res[b] = topk_hard(req);
        }
        auto t3 = clock::now();
        for (std::size_t b = 0; b < B; ++b)
            sink = sink + ham_res[b].indices.size() + exact_res[b].indices.size() +
                   hard_res[b].indices.size();

        if (trial < warmup) continue;
        ++measured;
        auto per_query = [&](clock::time_point a, clock::time_point b) {
            return std::chrono::duration<double, std::nano>(b - a).count() /
                   static_cast<double>(B);
        };
        ns_hamming.push_back(per_query(t0, t1));
        ns_exact.push_back(per_query(t1, t2));
        ns_hard.push_back(per_query(t2, t3));
        for (std::size_t b = 0; b < B; ++b) {
            rec_ham += recall_at_k(ham_res[b], exact_res[b]);
            rec_hard += recall_at_k(hard_res[b], exact_res[b]);
        }
    }
    (void)sink;

    double n_queries = static_cast<double>(measured) * static_cast<double>(B);
    BenchResult result;
    result.L = L;
    result.B = B;
    result.d = d;
    result.m = m;
    result.k = k;
    result.trials = trials;
    result.seed = seed;
    result.rows.push_back({"eta", detail::summarize(ns_hamming), rec_ham / n_queries});
    result.rows.push_back({"exact", detail::summarize(ns_exact), 1.0});
    result.rows.push_back({"hard", detail::summarize(ns_hard), rec_hard / n_queries});
    return result;
}

}  // namespace eta
