#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "eta/errors.hpp"
#include "eta/hashing.hpp"
#include "eta/matrix.hpp"

namespace eta {

// One top-k query: a target against a behavior sequence.
struct RetrievalRequest {
    std::vector<double> target_embedding;
    std::int64_t target_category = -1;
    const Matrix* sequence_embeddings = nullptr;  // L x d
    std::vector<std::int64_t> sequence_categories;
    std::size_t k = 1;
};

// Selected positions, ranked best-first, with engine-specific scores
// (always "larger is better": negated hamming distance, inner product, or
// recency for the hard engine).
struct RetrievalResult {
    std::vector<std::size_t> indices;
    std::vector<double> scores;
};

enum class Engine { Eta, Exact, Hard, EtaFrozen };

inline Engine parse_engine(const std::string& name) {
    if (name == "eta") return Engine::Eta;
    if (name == "exact") return Engine::Exact;
    if (name == "hard") return Engine::Hard;
    if (name == "eta-frozen") return Engine::EtaFrozen;
    throw ConfigError("unknown retrieval engine: \"" + name + "\"");
}

// Snapshot of sequence fingerprints. Never refreshed; passing one to
// topk_hamming emulates a stale two-stage index.
struct FingerprintStore {
    std::vector<Fingerprint> fingerprints;
    Fingerprint target;  // frozen target fingerprint, same snapshot
};

inline FingerprintStore freeze_fingerprints(const Matrix& e, const HashPlanes& planes) {
    if (e.rows == 0)
        throw ShapeError("freeze_fingerprints: empty embedding matrix");
    FingerprintStore store;
    store.fingerprints = fingerprint_batch(e, planes);
    return store;
}

namespace detail {

inline void validate(const RetrievalRequest& req) {
    if (req.sequence_embeddings == nullptr || req.sequence_embeddings->rows == 0)
        throw ShapeError("retrieval: empty behavior sequence");
    if (req.k == 0)
        throw ParamError("retrieval: k must be >= 1");
    if (req.target_embedding.size() != req.sequence_embeddings->cols)
        throw ShapeError("retrieval: target width " + std::to_string(req.target_embedding.size()) +
                         " != sequence width " + std::to_string(req.sequence_embeddings->cols));
}

// Select top-k by score, ties broken by recency (larger index wins).
inline RetrievalResult select_topk(const std::vector<double>& scores, std::size_t k) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a > b;
    };
    std::size_t take = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
    RetrievalResult res;
    res.indices.assign(order.begin(), order.begin() + take);
    res.scores.reserve(take);
    for (std::size_t i = 0; i < take; ++i) res.scores.push_back(scores[res.indices[i]]);
    return res;
}

// Top-k smallest hamming distances via per-distance buckets: O(L + m + k)
// instead of a comparison sort over float scores. Buckets are emitted in
// distance order; within a bucket the larger (more recent) index wins, which
// is the shared tie-break rule. Scores are negated distances.
inline RetrievalResult select_topk_hamming(const std::vector<std::uint32_t>& dists,
                                           std::size_t m, std::size_t k) {
    const std::size_t n = dists.size();
    const std::size_t take = std::min(k, n);
    RetrievalResult res;
    if (take == 0) return res;

    // histogram pass: find the cutoff distance where the cumulative count
    // first reaches k, then place items directly into their output slots
    std::vector<std::uint32_t> count(m + 1, 0);
    for (std::uint32_t d : dists) ++count[d];
    std::size_t cutoff = 0, below = 0;
    while (below + count[cutoff] < take) below += count[cutoff++];

    std::vector<std::size_t> cursor(cutoff + 1);
    std::size_t acc = 0;
    for (std::size_t d = 0; d <= cutoff; ++d) {
        cursor[d] = acc;
        acc += count[d];
    }
    std::size_t at_cutoff_quota = take - below;  // partial last bucket
    res.indices.resize(take);
    res.scores.resize(take);
    // descending index scan puts more recent items first within a distance
    for (std::size_t step = 0, placed = 0; step < n && placed < take; ++step) {
        std::size_t i = n - 1 - step;
        std::uint32_t d = dists[i];
        if (d > cutoff) continue;
        if (d == cutoff) {
            if (at_cutoff_quota == 0) continue;
            --at_cutoff_quota;
        }
        std::size_t slot = cursor[d]++;
        res.indices[slot] = i;
        res.scores[slot] = -static_cast<double>(d);
        ++placed;
    }
    return res;
}

}  // namespace detail

// SimHash + hamming-distance top-k. Fingerprints come from the current
// embeddings unless a frozen store is supplied. Scores are negated hamming
// distances.
inline RetrievalResult topk_hamming(const RetrievalRequest& req, const HashPlanes& planes,
                                    const FingerprintStore* cache = nullptr) {
    detail::validate(req);
    const Matrix& seq = *req.sequence_embeddings;
    if (seq.cols != planes.d())
        throw ShapeError("topk_hamming: embedding width != planes.d");

    // A store may optionally carry a frozen target fingerprint (vocab-level
    // staleness); otherwise the target is hashed from its current embedding.
    const Fingerprint target_fp = (cache && cache->target.m == planes.m())
                                      ? cache->target
                                      : simhash(req.target_embedding, planes);
    std::vector<std::uint32_t> dists(seq.rows);
    if (cache) {
        if (cache->fingerprints.size() != seq.rows)
            throw ShapeError("topk_hamming: frozen store length " +
                             std::to_string(cache->fingerprints.size()) +
                             " != sequence length " + std::to_string(seq.rows));
        for (std::size_t i = 0; i < seq.rows; ++i)
            dists[i] = static_cast<std::uint32_t>(hamming(cache->fingerprints[i], target_fp));
    } else {
        std::vector<Fingerprint> fps = fingerprint_batch(seq, planes);
        for (std::size_t i = 0; i < seq.rows; ++i)
            dists[i] = static_cast<std::uint32_t>(hamming(fps[i], target_fp));
    }
    return detail::select_topk_hamming(dists, planes.m(), req.k);
}

// Hamming top-k against an already-prepared fingerprint store and target
// fingerprint; this is the serving-time path the latency benchmark times
// (fingerprints live alongside the embedding table and are looked up, not
// recomputed per query).
inline RetrievalResult topk_hamming_prepared(const std::vector<Fingerprint>& seq_fps,
                                             const Fingerprint& target_fp, std::size_t k) {
    std::vector<std::uint32_t> dists(seq_fps.size());
    const std::size_t words = target_fp.words.size();
    for (std::size_t i = 0; i < seq_fps.size(); ++i) {
        std::size_t count = 0;
        const std::uint64_t* a = seq_fps[i].words.data();
        const std::uint64_t* b = target_fp.words.data();
        for (std::size_t w = 0; w < words; ++w)
            count += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
        dists[i] = static_cast<std::uint32_t>(count);
    }
    return detail::select_topk_hamming(dists, target_fp.m, k);
}

// Exact inner-product top-k; the oracle every approximate engine is
// measured against.
inline RetrievalResult topk_exact(const RetrievalRequest& req) {
    detail::validate(req);
    const Matrix& seq = *req.sequence_embeddings;
    std::vector<double> scores(seq.rows);
    for (std::size_t i = 0; i < seq.rows; ++i)
        scores[i] = dot(seq.row_ptr(i), req.target_embedding.data(), seq.cols);
    return detail::select_topk(scores, req.k);
}

// Category-match baseline: the k most recent items sharing the target's
// category. May return fewer than k, including zero.
inline RetrievalResult topk_hard(const RetrievalRequest& req) {
    detail::validate(req);
    if (req.sequence_categories.size() != req.sequence_embeddings->rows)
        throw ShapeError("topk_hard: category list length != sequence length");
    RetrievalResult res;
    const std::size_t n = req.sequence_categories.size();
    for (std::size_t step = 0; step < n && res.indices.size() < req.k; ++step) {
        std::size_t i = n - 1 - step;  // most recent first
        if (req.sequence_categories[i] == req.target_category) {
            res.indices.push_back(i);
            res.scores.push_back(static_cast<double>(i));
        }
    }
    return res;
}

}  // namespace eta
