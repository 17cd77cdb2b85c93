#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "eta/config.hpp"
#include "eta/errors.hpp"
#include "eta/model.hpp"

namespace eta {

// Versioned binary checkpoint. Doubles are written raw, so save -> load ->
// forward is bit-identical.
//
// Layout: magic "ETACKPT1" | u64 json_len | config json (model cfg + seed +
// variant + config hash) | u64 tensor_count | per tensor: u64 name_len, name,
// u64 rows, u64 cols, rows*cols doubles.
namespace detail {

constexpr char kCheckpointMagic[8] = {'E', 'T', 'A', 'C', 'K', 'P', 'T', '1'};

inline void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("checkpoint truncated");
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, ModelParams& params,
                            const ModelConfig& cfg, const std::string& variant,
                            const std::string& cfg_hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
    json meta = to_json(cfg);
    meta["seed"] = cfg.seed;
    meta["variant"] = variant;
    meta["config_hash"] = cfg_hash;
    std::string meta_str = meta.dump();
    detail::write_u64(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    std::uint64_t count = 0;
    params.for_each_tensor([&](const std::string&, Matrix&) { ++count; });
    detail::write_u64(out, count);
    params.for_each_tensor([&](const std::string& name, Matrix& m) {
        detail::write_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u64(out, m.rows);
        detail::write_u64(out, m.cols);
        out.write(reinterpret_cast<const char*>(m.data.data()),
                  static_cast<std::streamsize>(m.size() * sizeof(double)));
    });
    if (!out) throw IoError("checkpoint write failed: " + path);
}

struct LoadedCheckpoint {
    ModelParams params;
    ModelConfig config;
    std::string variant;
    std::string config_hash;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
        throw FormatError("not a checkpoint file: " + path);
    std::uint64_t meta_len = detail::read_u64(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw IoError("checkpoint truncated: " + path);
    json meta = json::parse(meta_str);

    LoadedCheckpoint result;
    json model_json = meta;
    model_json.erase("variant");
    model_json.erase("config_hash");
    std::uint64_t seed = model_json.at("seed").get<std::uint64_t>();
    model_json.erase("seed");
    result.config = model_config_from_json(model_json);
    result.config.seed = seed;
    result.variant = meta.at("variant").get<std::string>();
    result.config_hash = meta.at("config_hash").get<std::string>();
    result.params = ModelParams::init(result.config);

    std::uint64_t count = detail::read_u64(in);
    std::uint64_t seen = 0;
    std::vector<std::pair<std::string, Matrix*>> slots;
    result.params.for_each_tensor(
        [&](const std::string& name, Matrix& m) { slots.emplace_back(name, &m); });
    if (count != slots.size())
        throw FormatError("checkpoint tensor count " + std::to_string(count) +
                          " != expected " + std::to_string(slots.size()));
    for (auto& [expected_name, slot] : slots) {
        std::uint64_t name_len = detail::read_u64(in);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        std::uint64_t rows = detail::read_u64(in);
        std::uint64_t cols = detail::read_u64(in);
        if (name != expected_name)
            throw FormatError("checkpoint tensor order mismatch: got \"" + name +
                              "\", expected \"" + expected_name + "\"");
        if (rows != slot->rows || cols != slot->cols)
            throw FormatError("checkpoint shape mismatch for tensor \"" + name + "\": file " +
                              std::to_string(rows) + "x" + std::to_string(cols) + ", model " +
                              shape_str(*slot));
        in.read(reinterpret_cast<char*>(slot->data.data()),
                static_cast<std::streamsize>(slot->size() * sizeof(double)));
        if (!in) throw IoError("checkpoint truncated in tensor \"" + name + "\"");
        ++seen;
    }
    (void)seen;
    return result;
}

}  // namespace eta
