// Command-line entry point: gen-data | train | eval | bench.
// Each subcommand maps to one experiment phase; every artifact embeds the
// resolved config, its hash, and the seed.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eta/checkpoint.hpp"
#include "eta/config.hpp"
#include "eta/data.hpp"
#include "eta/eval.hpp"
#include "eta/trainer.hpp"

namespace fs = std::filesystem;
using eta::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitOther = 1;

struct CommonOpts {
    std::string config_path;
    std::string out_override;
    std::string variant_override;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    bool force = false;
};

eta::ExperimentConfig resolve_config(const CommonOpts& opts) {
    eta::ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = eta::load_experiment_config(opts.config_path);
    if (opts.has_seed_override) cfg.seed = opts.seed_override;
    if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
    if (!opts.variant_override.empty()) cfg.variant = opts.variant_override;
    if (const char* root = std::getenv("ETA_RESULTS_ROOT"))
        cfg.out_dir = (fs::path(root) / cfg.out_dir).string();
    cfg.model.seed = cfg.seed;
    cfg.model.variant = cfg.variant;
    cfg.synthetic.seed = cfg.seed;
    eta::parse_variant(cfg.variant);
    return cfg;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw eta::IoError("cannot write " + path);
    out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw eta::IoError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

std::vector<std::int64_t> read_item_categories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw eta::IoError("cannot open " + path);
    std::vector<std::int64_t> out;
    std::int64_t v;
    while (in >> v) out.push_back(v);
    return out;
}

int cmd_gen_data(const CommonOpts& opts) {
    eta::ExperimentConfig cfg = resolve_config(opts);
    fs::path dir(cfg.data_dir);
    if (fs::exists(dir / "manifest.json") && !opts.force) {
        std::cerr << "refusing to overwrite existing dataset in " << dir
                  << " (use --force)\n";
        return kExitIo;
    }
    fs::create_directories(dir);

    eta::InstanceSplit split;
    std::vector<std::int64_t> item_categories;
    std::size_t n_users, n_items, n_categories;
    std::size_t malformed = 0;
    if (!cfg.taobao_csv.empty()) {
        eta::BehaviorLog log = eta::ingest_taobao(cfg.taobao_csv, cfg.max_users, cfg.max_rows);
        split = eta::make_instances(log, cfg.model.S, cfg.model.L, cfg.seed);
        item_categories = log.item_category;
        n_users = log.n_users;
        n_items = log.n_items;
        n_categories = log.n_categories;
        malformed = log.malformed_rows;
        // persist remap tables so ids stay stable across runs
        auto write_remap = [&](const std::string& name, const std::vector<std::int64_t>& v) {
            std::ofstream out(dir / name, std::ios::trunc);
            for (std::int64_t x : v) out << x << "\n";
        };
        write_remap("user_remap.txt", log.user_remap);
        write_remap("item_remap.txt", log.item_remap);
        write_remap("category_remap.txt", log.category_remap);
    } else {
        eta::SyntheticData data = eta::generate(cfg.synthetic, cfg.model.S, cfg.model.L);
        split = eta::split_instances(data.instances);
        item_categories = data.log.item_category;
        n_users = data.log.n_users;
        n_items = data.log.n_items;
        n_categories = data.log.n_categories;
    }
    eta::write_instances((dir / "train.txt").string(), split.train);
    eta::write_instances((dir / "val.txt").string(), split.val);
    eta::write_instances((dir / "test.txt").string(), split.test);
    {
        std::ofstream out(dir / "item_categories.txt", std::ios::trunc);
        for (std::int64_t c : item_categories) out << c << "\n";
    }
    json manifest{{"train", split.train.size()},
                  {"val", split.val.size()},
                  {"test", split.test.size()},
                  {"dropped_users", split.dropped_users},
                  {"malformed_rows", malformed},
                  {"n_users", n_users},
                  {"n_items", n_items},
                  {"n_categories", n_categories},
                  {"seed", cfg.seed},
                  {"config_hash", eta::config_hash(cfg)},
                  {"config", eta::to_json(cfg)}};
    write_json_file((dir / "manifest.json").string(), manifest);
    std::cout << "wrote " << split.train.size() << "/" << split.val.size() << "/"
              << split.test.size() << " train/val/test instances to " << dir << "\n";
    return kExitOk;
}

// Fills vocab sizes from the dataset manifest and loads the split.
eta::InstanceSplit load_dataset(eta::ExperimentConfig& cfg,
                                std::vector<std::int64_t>& item_categories) {
    fs::path dir(cfg.data_dir);
    json manifest = read_json_file((dir / "manifest.json").string());
    cfg.model.user_vocab = manifest.at("n_users").get<std::size_t>();
    cfg.model.item_vocab = manifest.at("n_items").get<std::size_t>();
    cfg.model.category_vocab = manifest.at("n_categories").get<std::size_t>();
    item_categories = read_item_categories((dir / "item_categories.txt").string());
    eta::InstanceSplit split;
    split.train = eta::read_instances((dir / "train.txt").string());
    split.val = eta::read_instances((dir / "val.txt").string());
    split.test = eta::read_instances((dir / "test.txt").string());
    return split;
}

int cmd_train(const CommonOpts& opts) {
    eta::ExperimentConfig cfg = resolve_config(opts);
    std::vector<std::int64_t> item_categories;
    eta::InstanceSplit split = load_dataset(cfg, item_categories);
    fs::create_directories(cfg.out_dir);

    eta::Variant variant = eta::parse_variant(cfg.variant);
    eta::TrainResult result =
        eta::train_model(cfg.model, variant, split, cfg.epochs, item_categories);

    std::string hash = eta::config_hash(cfg);
    fs::path log_path = fs::path(cfg.out_dir) / ("train-" + cfg.variant + ".jsonl");
    std::ofstream log(log_path, std::ios::trunc);
    for (const auto& e : result.epochs) {
        log << json{{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"val_auc", e.val_auc},
                    {"val_loss", e.val_loss},
                    {"variant", cfg.variant},
                    {"seed", cfg.seed},
                    {"config_hash", hash}}
                   .dump()
            << "\n";
    }
    fs::path ckpt_path = fs::path(cfg.out_dir) / ("checkpoint-" + cfg.variant + ".bin");
    eta::save_checkpoint(ckpt_path.string(), result.params, cfg.model, cfg.variant, hash);
    std::cout << "best val AUC " << result.best_val_auc << " at epoch " << result.best_epoch
              << "; checkpoint " << ckpt_path << "\n";
    return kExitOk;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint_path) {
    eta::ExperimentConfig cfg = resolve_config(opts);
    std::vector<std::int64_t> item_categories;
    eta::InstanceSplit split = load_dataset(cfg, item_categories);
    fs::create_directories(cfg.out_dir);

    fs::path ckpt = checkpoint_path.empty()
                        ? fs::path(cfg.out_dir) / ("checkpoint-" + cfg.variant + ".bin")
                        : fs::path(checkpoint_path);
    eta::LoadedCheckpoint loaded = eta::load_checkpoint(ckpt.string());
    eta::Variant variant = eta::parse_variant(loaded.variant);

    eta::HashPlanes planes(loaded.config.d, loaded.config.m, loaded.config.seed ^ 0x9a50ULL);
    eta::FrozenVocabFingerprints frozen;
    if (variant == eta::Variant::EtaFrozen) {
        // rebuild the step-0 snapshot from a freshly initialized model
        eta::ModelParams initial = eta::ModelParams::init(loaded.config);
        frozen = eta::FrozenVocabFingerprints::build(initial, item_categories, planes);
    }
    eta::ModelRuntime rt = eta::make_runtime(
        variant, planes, variant == eta::Variant::EtaFrozen ? &frozen : nullptr);
    eta::EvalResult test = eta::evaluate(loaded.params, loaded.config, rt, split.test);

    json report{{"variant", loaded.variant},
                {"test_auc", test.auc},
                {"test_log_loss", test.log_loss},
                {"n_test", split.test.size()},
                {"seed", cfg.seed},
                {"config_hash", eta::config_hash(cfg)},
                {"checkpoint_config_hash", loaded.config_hash},
                {"config", eta::to_json(cfg)}};
    fs::path report_path = fs::path(cfg.out_dir) / ("eval-" + loaded.variant + ".json");
    write_json_file(report_path.string(), report);
    std::cout << "variant " << loaded.variant << ": test AUC " << test.auc << ", log-loss "
              << test.log_loss << " -> " << report_path << "\n";
    return kExitOk;
}

int cmd_bench(const CommonOpts& opts) {
    eta::ExperimentConfig cfg = resolve_config(opts);
    fs::create_directories(cfg.out_dir);
    json rows = json::array();
    std::printf("%6s %6s %5s %5s | %12s %12s %8s | %7s\n", "L", "B", "d", "m", "eta mean(ns)",
                "exact mean", "ratio", "recall");
    for (std::size_t L : cfg.bench.L)
        for (std::size_t B : cfg.bench.B)
            for (std::size_t d : cfg.bench.d)
                for (std::size_t m : cfg.bench.m) {
                    eta::BenchResult r = eta::bench_retrieval(L, B, d, m, cfg.bench.k,
                                                              cfg.bench.trials, cfg.seed);
                    const auto& ham = r.row("eta");
                    const auto& exact = r.row("exact");
                    const auto& hard = r.row("hard");
                    double ratio = ham.latency.mean_ns / exact.latency.mean_ns;
                    std::printf("%6zu %6zu %5zu %5zu | %12.0f %12.0f %8.3f | %7.4f\n", L, B, d,
                                m, ham.latency.mean_ns, exact.latency.mean_ns, ratio,
                                ham.mean_recall);
                    auto row_json = [&](const eta::BenchRow& row) {
                        return json{{"engine", row.engine},
                                    {"mean_ns", row.latency.mean_ns},
                                    {"p50_ns", row.latency.p50_ns},
                                    {"p95_ns", row.latency.p95_ns},
                                    {"recall", row.mean_recall}};
                    };
                    rows.push_back(json{{"L", L},
                                        {"B", B},
                                        {"d", d},
                                        {"m", m},
                                        {"k", cfg.bench.k},
                                        {"trials", cfg.bench.trials},
                                        {"hamming_exact_ratio", ratio},
                                        {"engines", json::array({row_json(ham), row_json(exact),
                                                                 row_json(hard)})}});
                }
    json report{{"seed", cfg.seed},
                {"config_hash", eta::config_hash(cfg)},
                {"config", eta::to_json(cfg)},
                {"rows", rows}};
    fs::path path = fs::path(cfg.out_dir) / "bench.json";
    write_json_file(path.string(), report);
    std::cout << "benchmark written to " << path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"end-to-end long-sequence CTR retrieval experiments"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string checkpoint_path;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "JSON experiment config");
        cmd->add_option("--out", opts.out_override, "output directory override");
        cmd->add_option("--variant", opts.variant_override,
                        "model variant: short-only|long-avg|eta|eta-frozen|exact-topk|full-ta|hard");
        cmd->add_option_function<std::uint64_t>(
            "--seed",
            [&](std::uint64_t s) {
                opts.seed_override = s;
                opts.has_seed_override = true;
            },
            "seed override");
        cmd->add_flag("--force", opts.force, "overwrite existing outputs");
    };
    CLI::App* gen = app.add_subcommand("gen-data", "generate or ingest a dataset");
    CLI::App* train = app.add_subcommand("train", "train one variant");
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    CLI::App* bench = app.add_subcommand("bench", "retrieval latency/recall benchmark");
    for (CLI::App* c : {gen, train, eval_cmd, bench}) add_common(c);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file to evaluate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(opts);
        if (train->parsed()) return cmd_train(opts);
        if (eval_cmd->parsed()) return cmd_eval(opts, checkpoint_path);
        if (bench->parsed()) return cmd_bench(opts);
    } catch (const eta::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const eta::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const eta::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitIo;
    } catch (const eta::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
