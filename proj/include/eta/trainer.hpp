#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eta/data.hpp"
#include "eta/eval.hpp"
#include "eta/hashing.hpp"
#include "eta/model.hpp"

namespace eta {

struct EvalResult {
    double auc = 0.0;
    double log_loss = 0.0;
};

inline EvalResult evaluate(const ModelParams& params, const ModelConfig& cfg,
                           const ModelRuntime& rt, const std::vector<Instance>& insts) {
    std::vector<double> probs;
    std::vector<int> labels;
    probs.reserve(insts.size());
    for (const Instance& inst : insts) {
        probs.push_back(model_forward(params, cfg, inst, rt));
        labels.push_back(inst.label);
    }
    return {auc(probs, labels), loss(probs, labels)};
}

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_auc = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ModelParams params;        // best-validation parameters
    ModelConfig config;
    Variant variant = Variant::Eta;
    std::vector<EpochLog> epochs;
    double best_val_auc = 0.0;
    std::size_t best_epoch = 0;
    HashPlanes planes;
    FrozenVocabFingerprints frozen;  // populated for eta-frozen only

    TrainResult() : planes(1, 1, 0) {}
};

inline ModelRuntime make_runtime(Variant variant, const HashPlanes& planes,
                                 const FrozenVocabFingerprints* frozen) {
    ModelRuntime rt;
    rt.variant = variant;
    rt.planes = &planes;
    rt.frozen = frozen;
    return rt;
}

// Full training loop: epochs of shuffled mini-batches, per-epoch validation,
// best-validation parameters kept. For eta-frozen, vocab fingerprints are
// snapshotted once from the initial embeddings and never refreshed; every
// other variant sees fresh fingerprints on each forward.
inline TrainResult train_model(const ModelConfig& cfg, Variant variant,
                               const InstanceSplit& split, std::size_t epochs,
                               const std::vector<std::int64_t>& item_categories) {
    cfg.validate();
    if (split.train.empty()) throw ParamError("train_model: empty training set");

    TrainResult result;
    result.config = cfg;
    result.variant = variant;
    result.planes = HashPlanes(cfg.d, cfg.m, cfg.seed ^ 0x9a50ULL);

    ModelParams params = ModelParams::init(cfg);
    if (variant == Variant::EtaFrozen)
        result.frozen = FrozenVocabFingerprints::build(params, item_categories, result.planes);
    ModelRuntime rt = make_runtime(variant, result.planes,
                                   variant == Variant::EtaFrozen ? &result.frozen : nullptr);

    AdamState adam = AdamState::init(params);
    Gradients grads = ModelParams::zeros_like(params);
    Rng shuffle_rng(cfg.seed ^ 0x5f0f5ULL);
    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    result.best_val_auc = -1.0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Instance> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(split.train[order[i]]);
            loss_sum += train_step(params, cfg, batch, rt, adam, grads);
            ++n_batches;
        }
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(n_batches);
        if (!split.val.empty()) {
            EvalResult val = evaluate(params, cfg, rt, split.val);
            log.val_auc = val.auc;
            log.val_loss = val.log_loss;
        }
        result.epochs.push_back(log);
        if (split.val.empty() || log.val_auc > result.best_val_auc) {
            result.best_val_auc = log.val_auc;
            result.best_epoch = epoch;
            result.params = params;
        }
    }
    return result;
}

}  // namespace eta
