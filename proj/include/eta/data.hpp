#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eta/errors.hpp"
#include "eta/model.hpp"
#include "eta/rng.hpp"

namespace eta {

// Raw behavior log, Taobao UserBehavior layout after dense id remapping.
struct BehaviorLog {
    struct Row {
        std::int64_t user = 0;
        std::int64_t item = 0;
        std::int64_t category = 0;
        bool is_click = false;
        std::int64_t timestamp = 0;
    };
    std::vector<Row> rows;                       // sorted per user by timestamp
    std::vector<std::vector<std::size_t>> by_user;  // row indices per dense user id
    std::size_t n_users = 0, n_items = 0, n_categories = 0;
    std::vector<std::int64_t> item_category;     // dominant category per dense item id
    std::size_t malformed_rows = 0;
    // dense id -> original id, persisted so checkpoints stay valid across runs
    std::vector<std::int64_t> user_remap, item_remap, category_remap;
};

struct SyntheticSpec {
    std::size_t n_users = 2000;
    std::size_t n_items = 10000;
    std::size_t n_categories = 200;
    std::size_t clusters_per_user = 3;
    std::size_t seq_len_min = 32;
    std::size_t seq_len_median = 128;
    std::size_t seq_len_max = 200;
    double signal_strength = 0.8;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_users == 0 || n_items == 0 || n_categories == 0 || clusters_per_user == 0)
            throw ConfigError("synthetic spec: all counts must be >= 1");
        if (2 * clusters_per_user > n_categories)
            throw ConfigError("synthetic spec: clusters_per_user too large for n_categories "
                              "(needs disjoint long/short cluster sets)");
        if (signal_strength < 0.0 || signal_strength > 1.0)
            throw ConfigError("synthetic spec: signal_strength must be in [0,1]");
        if (!(seq_len_min <= seq_len_median && seq_len_median <= seq_len_max) || seq_len_min == 0)
            throw ConfigError("synthetic spec: require 1 <= seq_len_min <= median <= max");
        if (n_items < n_categories)
            throw ConfigError("synthetic spec: need at least one item per category");
    }
};

struct SyntheticData {
    BehaviorLog log;
    std::vector<Instance> instances;
    std::vector<std::vector<std::int64_t>> user_long_clusters;  // ground truth, test oracle use
};

namespace detail {

// items are striped over categories: item i belongs to category i % C
inline std::int64_t synth_item_category(std::int64_t item, std::size_t n_categories) {
    return item % static_cast<std::int64_t>(n_categories);
}

inline std::int64_t synth_random_item_of(std::int64_t cat, std::size_t n_items,
                                         std::size_t n_categories, Rng& rng) {
    std::size_t per_cat = n_items / n_categories;
    std::size_t stripe = rng.next_below(per_cat);
    return cat + static_cast<std::int64_t>(stripe * n_categories);
}

}  // namespace detail

// Synthetic behavior data with planted long-term interests. Each user has a
// set of "long" interest categories driving the old part of the history and
// a disjoint "short" set driving recent behavior. Click labels depend only
// on whether the target's category is one of the user's long clusters, so
// the predictive signal lives exclusively in the long sequence.
inline SyntheticData generate(const SyntheticSpec& spec, std::size_t short_len,
                              std::size_t long_len) {
    spec.validate();
    Rng rng(spec.seed);
    SyntheticData out;
    BehaviorLog& log = out.log;
    log.n_users = spec.n_users;
    log.n_items = spec.n_items;
    log.n_categories = spec.n_categories;
    log.by_user.resize(spec.n_users);
    log.item_category.resize(spec.n_items);
    for (std::size_t i = 0; i < spec.n_items; ++i)
        log.item_category[i] = detail::synth_item_category(static_cast<std::int64_t>(i),
                                                           spec.n_categories);

    const std::size_t n_cats = spec.n_categories;
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        // disjoint long/short interest clusters
        std::vector<std::int64_t> cats(n_cats);
        for (std::size_t c = 0; c < n_cats; ++c) cats[c] = static_cast<std::int64_t>(c);
        for (std::size_t c = 0; c < 2 * spec.clusters_per_user; ++c) {
            std::size_t j = c + rng.next_below(n_cats - c);
            std::swap(cats[c], cats[j]);
        }
        std::vector<std::int64_t> long_clusters(cats.begin(),
                                                cats.begin() + spec.clusters_per_user);
        std::vector<std::int64_t> short_clusters(
            cats.begin() + spec.clusters_per_user,
            cats.begin() + 2 * spec.clusters_per_user);
        out.user_long_clusters.push_back(long_clusters);

        // history length: two-sided uniform around the median
        std::size_t n_h;
        if (rng.next_double() < 0.5)
            n_h = spec.seq_len_min + rng.next_below(spec.seq_len_median - spec.seq_len_min + 1);
        else
            n_h = spec.seq_len_median + rng.next_below(spec.seq_len_max - spec.seq_len_median + 1);

        const std::size_t recent = std::min(short_len, n_h);
        std::vector<BehaviorLog::Row> history(n_h);
        for (std::size_t t = 0; t < n_h; ++t) {
            bool in_recent = t >= n_h - recent;
            std::int64_t item;
            if (!in_recent && rng.next_double() < 0.9) {
                std::int64_t cat = long_clusters[rng.next_below(long_clusters.size())];
                item = detail::synth_random_item_of(cat, spec.n_items, n_cats, rng);
            } else if (in_recent && rng.next_double() < 0.7) {
                std::int64_t cat = short_clusters[rng.next_below(short_clusters.size())];
                item = detail::synth_random_item_of(cat, spec.n_items, n_cats, rng);
            } else {
                item = static_cast<std::int64_t>(rng.next_below(spec.n_items));
            }
            history[t] = {static_cast<std::int64_t>(u), item, log.item_category[item], true,
                          static_cast<std::int64_t>(t)};
        }
        for (const auto& row : history) {
            log.by_user[u].push_back(log.rows.size());
            log.rows.push_back(row);
        }

        // two targets per user: one inside the long clusters, one outside
        auto make_instance = [&](bool in_cluster) {
            std::int64_t cat;
            if (in_cluster) {
                cat = long_clusters[rng.next_below(long_clusters.size())];
            } else {
                do {
                    cat = static_cast<std::int64_t>(rng.next_below(n_cats));
                } while (std::find(long_clusters.begin(), long_clusters.end(), cat) !=
                         long_clusters.end());
            }
            double p_click = 0.5 + 0.5 * spec.signal_strength * (in_cluster ? 1.0 : -1.0);
            Instance inst;
            inst.user_id = static_cast<std::int64_t>(u);
            inst.target_item_id = detail::synth_random_item_of(cat, spec.n_items, n_cats, rng);
            inst.target_category_id = cat;
            inst.context_bucket_id = 0;
            inst.label = rng.next_double() < p_click ? 1 : 0;
            // user index doubles as global time so the chronological split
            // separates users between train and test
            inst.timestamp = static_cast<std::int64_t>(u * 1000 + n_h);
            for (std::size_t t = n_h - recent; t < n_h; ++t) {
                inst.short_items.push_back(history[t].item);
                inst.short_cats.push_back(history[t].category);
            }
            std::size_t long_take = std::min(long_len, n_h - recent);
            for (std::size_t t = n_h - recent - long_take; t < n_h - recent; ++t) {
                inst.long_items.push_back(history[t].item);
                inst.long_cats.push_back(history[t].category);
            }
            return inst;
        };
        out.instances.push_back(make_instance(true));
        out.instances.push_back(make_instance(false));
    }
    return out;
}

// Parse the Taobao UserBehavior CSV: user_id,item_id,category_id,behavior_type,timestamp
// (no header). Malformed rows are counted and skipped; ids are remapped to
// dense integers in first-seen order; rows are sorted per user by timestamp.
inline BehaviorLog ingest_taobao(const std::string& path, std::size_t max_users = 0,
                                 std::size_t max_rows = 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open behavior log: " + path);

    BehaviorLog log;
    std::unordered_map<std::int64_t, std::int64_t> user_map, item_map, cat_map;
    std::size_t total_rows = 0;
    std::string line;
    auto parse_i64 = [](const std::string& s, std::int64_t& out) {
        const char* b = s.data();
        const char* e = b + s.size();
        auto [p, ec] = std::from_chars(b, e, out);
        return ec == std::errc{} && p == e;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++total_rows;
        std::array<std::string, 5> fields;
        std::size_t start = 0, field = 0;
        bool ok = true;
        for (std::size_t i = 0; i <= line.size() && ok; ++i) {
            if (i == line.size() || line[i] == ',') {
                if (field >= 5) { ok = false; break; }
                fields[field++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        std::int64_t raw_user = 0, raw_item = 0, raw_cat = 0, ts = 0;
        ok = ok && field == 5 && parse_i64(fields[0], raw_user) && parse_i64(fields[1], raw_item) &&
             parse_i64(fields[2], raw_cat) && !fields[3].empty() && parse_i64(fields[4], ts);
        if (!ok) {
            ++log.malformed_rows;
            continue;
        }
        auto user_it = user_map.find(raw_user);
        if (user_it == user_map.end()) {
            if (max_users && user_map.size() >= max_users) continue;
            user_it = user_map.emplace(raw_user, static_cast<std::int64_t>(user_map.size())).first;
            log.user_remap.push_back(raw_user);
        }
        auto item_it = item_map.find(raw_item);
        if (item_it == item_map.end()) {
            item_it = item_map.emplace(raw_item, static_cast<std::int64_t>(item_map.size())).first;
            log.item_remap.push_back(raw_item);
        }
        auto cat_it = cat_map.find(raw_cat);
        if (cat_it == cat_map.end()) {
            cat_it = cat_map.emplace(raw_cat, static_cast<std::int64_t>(cat_map.size())).first;
            log.category_remap.push_back(raw_cat);
        }
        bool is_click = fields[3] == "pv" || fields[3] == "click";
        log.rows.push_back({user_it->second, item_it->second, cat_it->second, is_click, ts});
        if (max_rows && log.rows.size() >= max_rows) break;
    }
    if (total_rows == 0) throw FormatError("behavior log is empty: " + path);
    if (log.malformed_rows * 2 > total_rows)
        throw FormatError("more than 50% malformed rows in " + path);

    log.n_users = user_map.size();
    log.n_items = item_map.size();
    log.n_categories = cat_map.size();
    log.by_user.resize(log.n_users);
    std::vector<std::size_t> order(log.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (log.rows[a].user != log.rows[b].user) return log.rows[a].user < log.rows[b].user;
        return log.rows[a].timestamp < log.rows[b].timestamp;
    });
    std::vector<BehaviorLog::Row> sorted;
    sorted.reserve(log.rows.size());
    for (std::size_t i : order) sorted.push_back(log.rows[i]);
    log.rows = std::move(sorted);
    log.item_category.assign(log.n_items, 0);
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        log.by_user[static_cast<std::size_t>(log.rows[i].user)].push_back(i);
        log.item_category[static_cast<std::size_t>(log.rows[i].item)] = log.rows[i].category;
    }
    return log;
}

struct InstanceSplit {
    std::vector<Instance> train, val, test;
    std::size_t dropped_users = 0;
};

// Per user: the last click is the positive target; a random non-interacted
// item of the same category is the negative; older behaviors become the
// short (most recent S) and long (next L, strictly older) sequences.
// Chronological 80/10/10 split by sample timestamp.
inline InstanceSplit make_instances(const BehaviorLog& log, std::size_t S, std::size_t L,
                                    std::uint64_t seed) {
    Rng rng(seed);
    InstanceSplit out;

    // category -> items index for negative sampling
    std::vector<std::vector<std::int64_t>> cat_items(log.n_categories);
    for (std::size_t i = 0; i < log.n_items; ++i)
        cat_items[static_cast<std::size_t>(log.item_category[i])].push_back(
            static_cast<std::int64_t>(i));

    std::vector<Instance> all;
    for (std::size_t u = 0; u < log.n_users; ++u) {
        const auto& idx = log.by_user[u];
        if (idx.size() < 2) {
            ++out.dropped_users;
            continue;
        }
        // last click behavior is the positive target
        std::size_t target_pos = idx.size();
        for (std::size_t j = idx.size(); j-- > 0;) {
            if (log.rows[idx[j]].is_click) {
                target_pos = j;
                break;
            }
        }
        if (target_pos == idx.size() || target_pos == 0) {
            ++out.dropped_users;
            continue;
        }
        const BehaviorLog::Row& target = log.rows[idx[target_pos]];

        std::unordered_set<std::int64_t> interacted;
        for (std::size_t j : idx) interacted.insert(log.rows[j].item);
        const auto& candidates = cat_items[static_cast<std::size_t>(target.category)];
        std::int64_t negative = -1;
        for (int attempt = 0; attempt < 100; ++attempt) {
            std::int64_t cand = candidates[rng.next_below(candidates.size())];
            if (!interacted.count(cand)) {
                negative = cand;
                break;
            }
        }
        if (negative < 0) {
            ++out.dropped_users;
            continue;
        }

        Instance pos;
        pos.user_id = static_cast<std::int64_t>(u);
        pos.target_item_id = target.item;
        pos.target_category_id = target.category;
        pos.context_bucket_id = 0;
        pos.label = 1;
        pos.timestamp = target.timestamp;
        std::size_t hist = target_pos;  // behaviors strictly before the target
        std::size_t s_take = std::min(S, hist);
        for (std::size_t j = hist - s_take; j < hist; ++j) {
            pos.short_items.push_back(log.rows[idx[j]].item);
            pos.short_cats.push_back(log.rows[idx[j]].category);
        }
        std::size_t l_take = std::min(L, hist - s_take);
        for (std::size_t j = hist - s_take - l_take; j < hist - s_take; ++j) {
            pos.long_items.push_back(log.rows[idx[j]].item);
            pos.long_cats.push_back(log.rows[idx[j]].category);
        }
        Instance neg = pos;
        neg.target_item_id = negative;
        neg.label = 0;
        all.push_back(std::move(pos));
        all.push_back(std::move(neg));
    }

    std::stable_sort(all.begin(), all.end(),
                     [](const Instance& a, const Instance& b) { return a.timestamp < b.timestamp; });
    std::size_t n = all.size();
    std::size_t train_end = n * 8 / 10;
    std::size_t val_end = n * 9 / 10;
    // keep same-timestamp pos/neg pairs in one split
    if (train_end % 2 == 1) ++train_end;
    if (val_end % 2 == 1) ++val_end;
    out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_end));
    out.val.assign(all.begin() + static_cast<std::ptrdiff_t>(train_end),
                   all.begin() + static_cast<std::ptrdiff_t>(val_end));
    out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(val_end), all.end());
    return out;
}

// Chronological 80/10/10 split of already-built instances (synthetic path).
inline InstanceSplit split_instances(std::vector<Instance> all) {
    std::stable_sort(all.begin(), all.end(),
                     [](const Instance& a, const Instance& b) { return a.timestamp < b.timestamp; });
    InstanceSplit out;
    std::size_t n = all.size();
    std::size_t train_end = n * 8 / 10;
    std::size_t val_end = n * 9 / 10;
    if (train_end % 2 == 1) ++train_end;
    if (val_end % 2 == 1) ++val_end;
    out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_end));
    out.val.assign(all.begin() + static_cast<std::ptrdiff_t>(train_end),
                   all.begin() + static_cast<std::ptrdiff_t>(val_end));
    out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(val_end), all.end());
    return out;
}

// --- instance file format -------------------------------------------------
// One instance per line:
//   label user target_item target_cat context timestamp | i:c i:c ... | i:c i:c ...
// First id-pair block is the short sequence, second the long sequence;
// either may be empty. Deterministic ordering.

inline void write_instances(const std::string& path, const std::vector<Instance>& insts) {
    std::ofstream outf(path, std::ios::trunc);
    if (!outf) throw IoError("cannot write instance file: " + path);
    for (const Instance& inst : insts) {
        outf << inst.label << ' ' << inst.user_id << ' ' << inst.target_item_id << ' '
             << inst.target_category_id << ' ' << inst.context_bucket_id << ' '
             << inst.timestamp << " |";
        for (std::size_t i = 0; i < inst.short_items.size(); ++i)
            outf << ' ' << inst.short_items[i] << ':' << inst.short_cats[i];
        outf << " |";
        for (std::size_t i = 0; i < inst.long_items.size(); ++i)
            outf << ' ' << inst.long_items[i] << ':' << inst.long_cats[i];
        outf << '\n';
    }
    if (!outf) throw IoError("write failed: " + path);
}

inline std::vector<Instance> read_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open instance file: " + path);
    std::vector<Instance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Instance inst;
        std::string bar;
        if (!(ss >> inst.label >> inst.user_id >> inst.target_item_id >>
              inst.target_category_id >> inst.context_bucket_id >> inst.timestamp >> bar) ||
            bar != "|")
            throw FormatError(path + ":" + std::to_string(lineno) + ": bad instance header");
        std::string tok;
        bool in_long = false;
        while (ss >> tok) {
            if (tok == "|") {
                if (in_long)
                    throw FormatError(path + ":" + std::to_string(lineno) + ": extra separator");
                in_long = true;
                continue;
            }
            std::size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw FormatError(path + ":" + std::to_string(lineno) + ": bad id pair " + tok);
            std::int64_t item = std::stoll(tok.substr(0, colon));
            std::int64_t cat = std::stoll(tok.substr(colon + 1));
            if (in_long) {
                inst.long_items.push_back(item);
                inst.long_cats.push_back(cat);
            } else {
                inst.short_items.push_back(item);
                inst.short_cats.push_back(cat);
            }
        }
        if (!in_long)
            throw FormatError(path + ":" + std::to_string(lineno) + ": missing long-seq block");
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace eta
