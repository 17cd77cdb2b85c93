#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "eta/gradcheck.hpp"
#include "eta/model.hpp"

using namespace eta;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.d = 4;
    cfg.S = 4;
    cfg.L = 8;
    cfg.k = 2;
    cfg.m = 32;
    cfg.heads = 2;
    cfg.mlp_widths = {8, 4};
    cfg.item_vocab = 20;
    cfg.category_vocab = 5;
    cfg.user_vocab = 3;
    cfg.context_vocab = 1;
    cfg.seed = 7;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 4;
    return cfg;
}

Instance toy_instance(const ModelConfig& cfg, Rng& rng, int label) {
    Instance inst;
    inst.user_id = static_cast<std::int64_t>(rng.next_below(cfg.user_vocab));
    inst.target_item_id = static_cast<std::int64_t>(rng.next_below(cfg.item_vocab));
    inst.target_category_id =
        inst.target_item_id % static_cast<std::int64_t>(cfg.category_vocab);
    inst.context_bucket_id = 0;
    inst.label = label;
    for (std::size_t i = 0; i < cfg.S; ++i) {
        std::int64_t it = static_cast<std::int64_t>(rng.next_below(cfg.item_vocab));
        inst.short_items.push_back(it);
        inst.short_cats.push_back(it % static_cast<std::int64_t>(cfg.category_vocab));
    }
    for (std::size_t i = 0; i < cfg.L; ++i) {
        std::int64_t it = static_cast<std::int64_t>(rng.next_below(cfg.item_vocab));
        inst.long_items.push_back(it);
        inst.long_cats.push_back(it % static_cast<std::int64_t>(cfg.category_vocab));
    }
    return inst;
}

ModelRuntime eta_runtime(const HashPlanes& planes) {
    ModelRuntime rt;
    rt.variant = Variant::Eta;
    rt.planes = &planes;
    return rt;
}

}  // namespace

TEST_CASE("zero parameters predict exactly 0.5") {
    ModelConfig cfg = toy_config();
    ModelParams init = ModelParams::init(cfg);
    ModelParams zeros = ModelParams::zeros_like(init);
    HashPlanes planes(cfg.d, cfg.m, 3);
    Rng rng(1);
    Instance inst = toy_instance(cfg, rng, 1);
    CHECK(model_forward(zeros, cfg, inst, eta_runtime(planes)) == 0.5);
}

TEST_CASE("loss values") {
    CHECK(loss({0.5}, {1}) == Catch::Approx(0.6931471805599453).margin(1e-15));
    CHECK(loss({0.5}, {0}) == Catch::Approx(0.6931471805599453).margin(1e-15));
    CHECK(loss({0.9, 0.9}, {1, 0}) == Catch::Approx(1.203972804325936).margin(1e-12));
    // clamp keeps a confident wrong answer finite
    CHECK(loss({0.0}, {1}) == Catch::Approx(-std::log(1e-7)).margin(1e-9));
    CHECK(loss({1.0}, {0}) == Catch::Approx(-std::log(1e-7)).margin(1e-9));
    CHECK_THROWS_AS(loss({0.5, 0.5}, {1}), ParamError);
    CHECK_THROWS_AS(loss({}, {}), ParamError);
}

TEST_CASE("config validation") {
    ModelConfig cfg = toy_config();
    cfg.k = cfg.L + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_config();
    cfg.heads = 3;  // does not divide d=4
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_config();
    cfg.mlp_widths.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(parse_variant("gru4rec"), ConfigError);
    for (const char* name : {"short-only", "long-avg", "eta", "eta-frozen", "exact-topk",
                             "full-ta", "hard"})
        CHECK(variant_name(parse_variant(name)) == name);
}

TEST_CASE("non-finite parameters raise NumericError") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    params.mlp_b.back().data[0] = std::numeric_limits<double>::quiet_NaN();
    HashPlanes planes(cfg.d, cfg.m, 3);
    Rng rng(2);
    Instance inst = toy_instance(cfg, rng, 0);
    CHECK_THROWS_AS(model_forward(params, cfg, inst, eta_runtime(planes)), NumericError);
}

TEST_CASE("learning rate zero leaves parameters unchanged") {
    ModelConfig cfg = toy_config();
    cfg.learning_rate = 0.0;
    ModelParams params = ModelParams::init(cfg);
    ModelParams before = params;
    HashPlanes planes(cfg.d, cfg.m, 3);
    ModelRuntime rt = eta_runtime(planes);
    AdamState adam = AdamState::init(params);
    Gradients grads = ModelParams::zeros_like(params);
    Rng rng(3);
    std::vector<Instance> batch = {toy_instance(cfg, rng, 1), toy_instance(cfg, rng, 0)};
    train_step(params, cfg, batch, rt, adam, grads);
    bool unchanged = true;
    std::vector<const Matrix*> b;
    before.for_each_tensor([&](const std::string&, Matrix& m) { b.push_back(&m); });
    std::size_t i = 0;
    params.for_each_tensor([&](const std::string&, Matrix& m) {
        if (m.data != b[i]->data) unchanged = false;
        ++i;
    });
    CHECK(unchanged);
}

TEST_CASE("training overfits one small batch") {
    ModelConfig cfg = toy_config();
    cfg.learning_rate = 5e-3;
    ModelParams params = ModelParams::init(cfg);
    HashPlanes planes(cfg.d, cfg.m, 3);
    ModelRuntime rt = eta_runtime(planes);
    AdamState adam = AdamState::init(params);
    Gradients grads = ModelParams::zeros_like(params);
    Rng rng(5);
    std::vector<Instance> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(toy_instance(cfg, rng, i % 2));

    std::vector<double> window_means;
    double acc = 0.0;
    for (int step = 0; step < 200; ++step) {
        acc += train_step(params, cfg, batch, rt, adam, grads);
        if ((step + 1) % 50 == 0) {
            window_means.push_back(acc / 50.0);
            acc = 0.0;
        }
    }
    for (std::size_t w = 1; w < window_means.size(); ++w)
        CHECK(window_means[w] < window_means[w - 1]);
    CHECK(window_means.back() < 0.05);
}

TEST_CASE("training is bit-deterministic") {
    ModelConfig cfg = toy_config();
    HashPlanes planes(cfg.d, cfg.m, 3);
    ModelRuntime rt = eta_runtime(planes);
    auto run = [&] {
        ModelParams params = ModelParams::init(cfg);
        AdamState adam = AdamState::init(params);
        Gradients grads = ModelParams::zeros_like(params);
        Rng rng(6);
        std::vector<Instance> batch;
        for (int i = 0; i < 4; ++i) batch.push_back(toy_instance(cfg, rng, i % 2));
        for (int step = 0; step < 20; ++step) train_step(params, cfg, batch, rt, adam, grads);
        return params;
    };
    ModelParams a = run();
    ModelParams b = run();
    std::vector<const Matrix*> bt;
    b.for_each_tensor([&](const std::string&, Matrix& m) { bt.push_back(&m); });
    std::size_t i = 0;
    a.for_each_tensor([&](const std::string&, Matrix& m) {
        CHECK(m.data == bt[i]->data);
        ++i;
    });
}

TEST_CASE("full-model gradients match finite differences") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    HashPlanes planes(cfg.d, cfg.m, 11);
    ModelRuntime rt = eta_runtime(planes);
    Rng rng(17);
    Instance inst = toy_instance(cfg, rng, 1);

    ForwardCache cache;
    double p = model_forward(params, cfg, inst, rt, &cache);
    Gradients grads = ModelParams::zeros_like(params);
    model_backward(params, cfg, inst, rt, cache, p - inst.label, grads);

    std::vector<Matrix*> pts;
    std::vector<const Matrix*> gts;
    params.for_each_tensor([&](const std::string&, Matrix& m) { pts.push_back(&m); });
    grads.for_each_tensor([&](const std::string&, Matrix& m) { gts.push_back(&m); });
    auto objective = [&] {
        return loss({model_forward(params, cfg, inst, rt)}, {inst.label});
    };
    CHECK(backward_check(pts, gts, objective, 1e-5) < 1e-3);
}

TEST_CASE("non-selected long rows receive exactly zero gradient") {
    ModelConfig cfg = toy_config();
    cfg.user_vocab = 16;  // spread ids so scatter collisions don't mask zeros
    cfg.item_vocab = 64;
    cfg.category_vocab = 64;
    ModelParams params = ModelParams::init(cfg);
    HashPlanes planes(cfg.d, cfg.m, 11);
    ModelRuntime rt = eta_runtime(planes);

    Instance inst;
    inst.user_id = 0;
    inst.target_item_id = 0;
    inst.target_category_id = 1;
    inst.label = 1;
    // distinct item and category ids everywhere: any gradient on a long row's
    // ids can only come from the long branch
    for (std::size_t i = 0; i < cfg.S; ++i) {
        inst.short_items.push_back(static_cast<std::int64_t>(2 + i));
        inst.short_cats.push_back(static_cast<std::int64_t>(2 + i));
    }
    for (std::size_t i = 0; i < cfg.L; ++i) {
        inst.long_items.push_back(static_cast<std::int64_t>(20 + i));
        inst.long_cats.push_back(static_cast<std::int64_t>(20 + i));
    }

    ForwardCache cache;
    double p = model_forward(params, cfg, inst, rt, &cache);
    Gradients grads = ModelParams::zeros_like(params);
    model_backward(params, cfg, inst, rt, cache, p - inst.label, grads);

    REQUIRE(cache.lti_cache.selected.size() == cfg.k);
    for (std::size_t i = 0; i < cfg.L; ++i) {
        bool selected = std::find(cache.lti_cache.selected.begin(),
                                  cache.lti_cache.selected.end(),
                                  i) != cache.lti_cache.selected.end();
        const double* gi = grads.item.rows.row_ptr(static_cast<std::size_t>(20 + i));
        double norm = 0.0;
        for (std::size_t j = 0; j < cfg.d; ++j) norm += std::abs(gi[j]);
        if (selected)
            CHECK(norm > 0.0);
        else
            CHECK(norm == 0.0);
    }
}

TEST_CASE("short-only ignores the long sequence") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    ModelRuntime rt;
    rt.variant = Variant::ShortOnly;
    Rng rng(19);
    Instance inst = toy_instance(cfg, rng, 1);
    double base = model_forward(params, cfg, inst, rt);
    Instance shuffled = inst;
    std::reverse(shuffled.long_items.begin(), shuffled.long_items.end());
    std::reverse(shuffled.long_cats.begin(), shuffled.long_cats.end());
    CHECK(model_forward(params, cfg, shuffled, rt) == base);
    shuffled.long_items.clear();
    shuffled.long_cats.clear();
    CHECK(model_forward(params, cfg, shuffled, rt) == base);
}

TEST_CASE("exact-topk with k >= L equals full target attention") {
    ModelConfig cfg = toy_config();
    cfg.k = cfg.L;
    ModelParams params = ModelParams::init(cfg);
    ModelRuntime exact_rt;
    exact_rt.variant = Variant::ExactTopk;
    ModelRuntime full_rt;
    full_rt.variant = Variant::FullTa;
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        Instance inst = toy_instance(cfg, rng, trial % 2);
        CHECK(model_forward(params, cfg, inst, exact_rt) ==
              model_forward(params, cfg, inst, full_rt));
    }
}

TEST_CASE("long-avg long feature is the sequence mean") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    ModelRuntime rt;
    rt.variant = Variant::LongAvg;
    Rng rng(29);
    Instance inst = toy_instance(cfg, rng, 1);
    ForwardCache cache;
    model_forward(params, cfg, inst, rt, &cache);
    Matrix seq = detail::seq_embeddings(params, inst.long_items, inst.long_cats);
    for (std::size_t j = 0; j < cfg.d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < seq.rows; ++i) mean += seq.at(i, j);
        mean /= static_cast<double>(seq.rows);
        CHECK(cache.concat.data[j] == Catch::Approx(mean).margin(1e-12));
    }
    // empty long history falls back to the learned no-context vector
    Instance empty = inst;
    empty.long_items.clear();
    empty.long_cats.clear();
    ForwardCache cache2;
    model_forward(params, cfg, empty, rt, &cache2);
    for (std::size_t j = 0; j < cfg.d; ++j)
        CHECK(cache2.concat.data[j] == params.no_context.data[j]);
}

TEST_CASE("parameter count is identical across variants") {
    ModelConfig cfg = toy_config();
    std::size_t base = 0;
    for (const char* name : {"short-only", "long-avg", "eta", "eta-frozen", "exact-topk",
                             "full-ta", "hard"}) {
        cfg.variant = name;
        ModelParams p = ModelParams::init(cfg);
        std::size_t n = p.parameter_count();
        if (base == 0) base = n;
        CHECK(n == base);
    }
}

TEST_CASE("eta-frozen equals eta at initialization") {
    // snapshot taken before any update hashes the same embeddings the live
    // engine sees, so both must select identically
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    HashPlanes planes(cfg.d, cfg.m, 31);
    std::vector<std::int64_t> item_cats(cfg.item_vocab);
    for (std::size_t i = 0; i < cfg.item_vocab; ++i)
        item_cats[i] = static_cast<std::int64_t>(i % cfg.category_vocab);
    FrozenVocabFingerprints frozen = FrozenVocabFingerprints::build(params, item_cats, planes);

    ModelRuntime eta_rt = eta_runtime(planes);
    ModelRuntime frozen_rt;
    frozen_rt.variant = Variant::EtaFrozen;
    frozen_rt.planes = &planes;
    frozen_rt.frozen = &frozen;

    Rng rng(37);
    for (int trial = 0; trial < 10; ++trial) {
        Instance inst = toy_instance(cfg, rng, trial % 2);
        CHECK(model_forward(params, cfg, inst, eta_rt) ==
              model_forward(params, cfg, inst, frozen_rt));
    }
}

TEST_CASE("eta-frozen diverges after embeddings move") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    HashPlanes planes(cfg.d, cfg.m, 31);
    std::vector<std::int64_t> item_cats(cfg.item_vocab);
    for (std::size_t i = 0; i < cfg.item_vocab; ++i)
        item_cats[i] = static_cast<std::int64_t>(i % cfg.category_vocab);
    FrozenVocabFingerprints frozen = FrozenVocabFingerprints::build(params, item_cats, planes);

    // push the item table far from the snapshot
    Rng jolt(41);
    params.item.rows = Matrix::gaussian(cfg.item_vocab, cfg.d, jolt);

    ModelRuntime frozen_rt;
    frozen_rt.variant = Variant::EtaFrozen;
    frozen_rt.planes = &planes;
    frozen_rt.frozen = &frozen;
    ModelRuntime eta_rt = eta_runtime(planes);

    Rng rng(43);
    int diverged = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Instance inst = toy_instance(cfg, rng, trial % 2);
        ForwardCache a, b;
        model_forward(params, cfg, inst, eta_rt, &a);
        model_forward(params, cfg, inst, frozen_rt, &b);
        if (a.lti_cache.selected != b.lti_cache.selected) ++diverged;
    }
    CHECK(diverged > 0);
}

TEST_CASE("adam first step moves weights by roughly lr in sign direction") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    ModelParams before = params;
    Gradients grads = ModelParams::zeros_like(params);
    grads.mlp_b.back().data[0] = 2.5;  // only one nonzero gradient entry
    AdamState adam = AdamState::init(params);
    adam_update(params, grads, adam, 1e-2);
    double delta = params.mlp_b.back().data[0] - before.mlp_b.back().data[0];
    CHECK(delta == Catch::Approx(-1e-2).epsilon(1e-4));  // mhat/sqrt(vhat) ~ sign(g)
    CHECK(params.mlp_w[0].data == before.mlp_w[0].data);
}

TEST_CASE("embedding lookup range errors name the table") {
    ModelConfig cfg = toy_config();
    ModelParams params = ModelParams::init(cfg);
    REQUIRE_THROWS_MATCHES(
        params.user.lookup(static_cast<std::int64_t>(cfg.user_vocab)), ParamError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("user")));
    CHECK_THROWS_AS(params.item.lookup(-1), ParamError);
}
