#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eta/data.hpp"
#include "eta/errors.hpp"
#include "eta/model.hpp"

namespace eta {

using json = nlohmann::json;

struct BenchGrid {
    std::vector<std::size_t> L = {1024};
    std::vector<std::size_t> B = {256};
    std::vector<std::size_t> d = {128};
    std::vector<std::size_t> m = {8, 32, 128, 512};
    std::size_t k = 48;
    std::size_t trials = 50;
};

// Everything one experiment needs, loadable from a JSON config file.
// Unknown keys are rejected; all defaults are materialized back into the
// emitted reports.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "results";
    std::string data_dir = "data";
    std::string variant = "eta";
    std::size_t epochs = 5;
    ModelConfig model;
    SyntheticSpec synthetic;
    std::string taobao_csv;  // when set, gen-data ingests instead of synthesizing
    std::size_t max_users = 0, max_rows = 0;
    BenchGrid bench;
};

namespace detail {

inline void reject_unknown(const json& j, const std::vector<std::string>& known,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw ConfigError("unknown config key \"" + it.key() + "\" in " + where);
    }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const ModelConfig& m) {
    return json{{"d", m.d},
                {"S", m.S},
                {"L", m.L},
                {"k", m.k},
                {"m", m.m},
                {"heads", m.heads},
                {"mlp_widths", m.mlp_widths},
                {"learning_rate", m.learning_rate},
                {"batch_size", m.batch_size},
                {"item_vocab", m.item_vocab},
                {"category_vocab", m.category_vocab},
                {"user_vocab", m.user_vocab},
                {"context_vocab", m.context_vocab}};
}

inline ModelConfig model_config_from_json(const json& j) {
    detail::reject_unknown(j, {"d", "S", "L", "k", "m", "heads", "mlp_widths", "learning_rate",
                               "batch_size", "item_vocab", "category_vocab", "user_vocab",
                               "context_vocab"},
                           "model");
    ModelConfig m;
    detail::get_if(j, "d", m.d);
    detail::get_if(j, "S", m.S);
    detail::get_if(j, "L", m.L);
    detail::get_if(j, "k", m.k);
    detail::get_if(j, "m", m.m);
    detail::get_if(j, "heads", m.heads);
    detail::get_if(j, "mlp_widths", m.mlp_widths);
    detail::get_if(j, "learning_rate", m.learning_rate);
    detail::get_if(j, "batch_size", m.batch_size);
    detail::get_if(j, "item_vocab", m.item_vocab);
    detail::get_if(j, "category_vocab", m.category_vocab);
    detail::get_if(j, "user_vocab", m.user_vocab);
    detail::get_if(j, "context_vocab", m.context_vocab);
    return m;
}

inline json to_json(const SyntheticSpec& s) {
    return json{{"n_users", s.n_users},
                {"n_items", s.n_items},
                {"n_categories", s.n_categories},
                {"clusters_per_user", s.clusters_per_user},
                {"seq_len_min", s.seq_len_min},
                {"seq_len_median", s.seq_len_median},
                {"seq_len_max", s.seq_len_max},
                {"signal_strength", s.signal_strength},
                {"seed", s.seed}};
}

inline SyntheticSpec synthetic_spec_from_json(const json& j) {
    detail::reject_unknown(j, {"n_users", "n_items", "n_categories", "clusters_per_user",
                               "seq_len_min", "seq_len_median", "seq_len_max",
                               "signal_strength", "seed"},
                           "synthetic");
    SyntheticSpec s;
    detail::get_if(j, "n_users", s.n_users);
    detail::get_if(j, "n_items", s.n_items);
    detail::get_if(j, "n_categories", s.n_categories);
    detail::get_if(j, "clusters_per_user", s.clusters_per_user);
    detail::get_if(j, "seq_len_min", s.seq_len_min);
    detail::get_if(j, "seq_len_median", s.seq_len_median);
    detail::get_if(j, "seq_len_max", s.seq_len_max);
    detail::get_if(j, "signal_strength", s.signal_strength);
    detail::get_if(j, "seed", s.seed);
    return s;
}

inline json to_json(const BenchGrid& b) {
    return json{{"L", b.L}, {"B", b.B}, {"d", b.d}, {"m", b.m}, {"k", b.k}, {"trials", b.trials}};
}

inline BenchGrid bench_grid_from_json(const json& j) {
    detail::reject_unknown(j, {"L", "B", "d", "m", "k", "trials"}, "bench");
    BenchGrid b;
    detail::get_if(j, "L", b.L);
    detail::get_if(j, "B", b.B);
    detail::get_if(j, "d", b.d);
    detail::get_if(j, "m", b.m);
    detail::get_if(j, "k", b.k);
    detail::get_if(j, "trials", b.trials);
    return b;
}

inline json to_json(const ExperimentConfig& c) {
    return json{{"seed", c.seed},
                {"out_dir", c.out_dir},
                {"data_dir", c.data_dir},
                {"variant", c.variant},
                {"epochs", c.epochs},
                {"model", to_json(c.model)},
                {"synthetic", to_json(c.synthetic)},
                {"taobao_csv", c.taobao_csv},
                {"max_users", c.max_users},
                {"max_rows", c.max_rows},
                {"bench", to_json(c.bench)}};
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    detail::reject_unknown(j, {"seed", "out_dir", "data_dir", "variant", "epochs", "model",
                               "synthetic", "taobao_csv", "max_users", "max_rows", "bench"},
                           "top level");
    ExperimentConfig c;
    detail::get_if(j, "seed", c.seed);
    detail::get_if(j, "out_dir", c.out_dir);
    detail::get_if(j, "data_dir", c.data_dir);
    detail::get_if(j, "variant", c.variant);
    detail::get_if(j, "epochs", c.epochs);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("synthetic")) c.synthetic = synthetic_spec_from_json(j.at("synthetic"));
    detail::get_if(j, "taobao_csv", c.taobao_csv);
    detail::get_if(j, "max_users", c.max_users);
    detail::get_if(j, "max_rows", c.max_rows);
    if (j.contains("bench")) c.bench = bench_grid_from_json(j.at("bench"));
    parse_variant(c.variant);  // fail fast on typos
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return experiment_config_from_json(j);
}

// FNV-1a over the canonical serialized config; embedded in every artifact so
// equal hashes imply equal non-latency outputs.
inline std::string config_hash(const ExperimentConfig& c) {
    std::string s = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace eta
