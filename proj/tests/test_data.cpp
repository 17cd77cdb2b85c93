#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eta/data.hpp"
#include "eta/eval.hpp"

using namespace eta;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

SyntheticSpec small_spec(double signal, std::uint64_t seed) {
    SyntheticSpec s;
    s.n_users = 300;
    s.n_items = 2000;
    s.n_categories = 40;
    s.clusters_per_user = 3;
    s.seq_len_min = 16;
    s.seq_len_median = 48;
    s.seq_len_max = 80;
    s.signal_strength = signal;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
    SyntheticData a = generate(small_spec(0.8, 9), 8, 64);
    SyntheticData b = generate(small_spec(0.8, 9), 8, 64);
    REQUIRE(a.instances.size() == b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        CHECK(a.instances[i].target_item_id == b.instances[i].target_item_id);
        CHECK(a.instances[i].label == b.instances[i].label);
        CHECK(a.instances[i].long_items == b.instances[i].long_items);
        CHECK(a.instances[i].short_items == b.instances[i].short_items);
    }
    SyntheticData c = generate(small_spec(0.8, 10), 8, 64);
    bool differs = false;
    for (std::size_t i = 0; i < a.instances.size() && !differs; ++i)
        differs = a.instances[i].target_item_id != c.instances[i].target_item_id;
    CHECK(differs);
}

TEST_CASE("synthetic shape invariants") {
    const std::size_t S = 8, L = 64;
    SyntheticSpec spec = small_spec(0.8, 11);
    SyntheticData d = generate(spec, S, L);
    CHECK(d.instances.size() == 2 * spec.n_users);
    std::size_t in_long_cluster = 0, long_total = 0;
    for (std::size_t i = 0; i < d.instances.size(); ++i) {
        const Instance& inst = d.instances[i];
        CHECK(inst.short_items.size() <= S);
        CHECK(inst.long_items.size() <= L);
        CHECK(inst.short_items.size() == inst.short_cats.size());
        CHECK(inst.long_items.size() == inst.long_cats.size());
        for (std::size_t j = 0; j < inst.long_items.size(); ++j)
            CHECK(inst.long_cats[j] ==
                  inst.long_items[j] % static_cast<std::int64_t>(spec.n_categories));
        const auto& clusters = d.user_long_clusters[static_cast<std::size_t>(inst.user_id)];
        for (std::int64_t c : inst.long_cats) {
            ++long_total;
            if (std::find(clusters.begin(), clusters.end(), c) != clusters.end())
                ++in_long_cluster;
        }
    }
    // long history draws ~90% from the planted long-interest clusters
    CHECK(static_cast<double>(in_long_cluster) / static_cast<double>(long_total) > 0.7);
}

TEST_CASE("full signal strength is separable by the planted clusters") {
    SyntheticData d = generate(small_spec(1.0, 13), 8, 64);
    std::vector<double> oracle;
    std::vector<int> labels;
    for (const Instance& inst : d.instances) {
        const auto& clusters = d.user_long_clusters[static_cast<std::size_t>(inst.user_id)];
        bool in = std::find(clusters.begin(), clusters.end(), inst.target_category_id) !=
                  clusters.end();
        oracle.push_back(in ? 1.0 : 0.0);
        labels.push_back(inst.label);
    }
    CHECK(auc(oracle, labels) >= 0.95);
}

TEST_CASE("zero signal strength is unpredictable") {
    SyntheticSpec spec = small_spec(0.0, 17);
    spec.n_users = 500;
    SyntheticData d = generate(spec, 8, 64);
    std::vector<double> oracle;
    std::vector<int> labels;
    for (const Instance& inst : d.instances) {
        const auto& clusters = d.user_long_clusters[static_cast<std::size_t>(inst.user_id)];
        bool in = std::find(clusters.begin(), clusters.end(), inst.target_category_id) !=
                  clusters.end();
        oracle.push_back(in ? 1.0 : 0.0);
        labels.push_back(inst.label);
    }
    CHECK(std::abs(auc(oracle, labels) - 0.5) < 0.08);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec s = small_spec(0.8, 1);
    s.clusters_per_user = 30;  // 2*30 > 40 categories
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small_spec(1.5, 1);
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small_spec(0.8, 1);
    s.seq_len_min = 100;  // min > median
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("behavior log ingestion") {
    std::string path = temp_path("eta_test_taobao.csv");
    write_file(path,
               "10,100,5,pv,1002\n"
               "10,101,6,buy,1001\n"
               "20,100,5,pv,2000\n"
               "this line is garbage\n"
               "30,102,5,click,1500\n"
               "30,102,5,click,1500\n");
    BehaviorLog log = ingest_taobao(path);
    CHECK(log.malformed_rows == 1);
    CHECK(log.n_users == 3);
    CHECK(log.n_items == 3);
    CHECK(log.n_categories == 2);
    CHECK(log.rows.size() == 5);  // exact duplicate rows are preserved
    CHECK(log.user_remap == std::vector<std::int64_t>{10, 20, 30});
    CHECK(log.item_remap == std::vector<std::int64_t>{100, 101, 102});
    CHECK(log.category_remap == std::vector<std::int64_t>{5, 6});

    // user 0's rows sorted by timestamp; buy is not a click
    const auto& u0 = log.by_user[0];
    REQUIRE(u0.size() == 2);
    CHECK(log.rows[u0[0]].timestamp == 1001);
    CHECK_FALSE(log.rows[u0[0]].is_click);
    CHECK(log.rows[u0[1]].timestamp == 1002);
    CHECK(log.rows[u0[1]].is_click);

    CHECK(log.item_category[0] == 0);  // item 100 -> category 5 -> dense 0
    CHECK(log.item_category[1] == 1);
    std::remove(path.c_str());
}

TEST_CASE("ingestion failure modes") {
    CHECK_THROWS_AS(ingest_taobao(temp_path("eta_no_such_file.csv")), IoError);

    std::string empty = temp_path("eta_test_empty.csv");
    write_file(empty, "");
    CHECK_THROWS_AS(ingest_taobao(empty), FormatError);
    std::remove(empty.c_str());

    std::string bad = temp_path("eta_test_mostly_bad.csv");
    write_file(bad,
               "nonsense\n"
               "more,nonsense\n"
               "10,100,5,pv,1000\n");
    CHECK_THROWS_AS(ingest_taobao(bad), FormatError);
    std::remove(bad.c_str());
}

TEST_CASE("ingestion honors max_users and max_rows") {
    std::string path = temp_path("eta_test_caps.csv");
    write_file(path,
               "1,100,5,pv,1\n"
               "2,101,5,pv,2\n"
               "3,102,5,pv,3\n"
               "1,103,5,pv,4\n");
    BehaviorLog capped = ingest_taobao(path, /*max_users=*/2);
    CHECK(capped.n_users == 2);
    CHECK(capped.rows.size() == 3);  // user 3's row skipped, user 1's later row kept
    BehaviorLog limited = ingest_taobao(path, 0, /*max_rows=*/2);
    CHECK(limited.rows.size() == 2);
    std::remove(path.c_str());
}

TEST_CASE("make_instances builds positive/negative pairs from the last click") {
    BehaviorLog log;
    log.n_users = 1;
    log.n_items = 10;
    log.n_categories = 2;
    log.item_category.resize(10);
    for (std::size_t i = 0; i < 10; ++i)
        log.item_category[i] = static_cast<std::int64_t>(i % 2);
    // user 0: six clicks, last one on item 8 (category 0)
    std::vector<std::int64_t> items = {1, 3, 5, 2, 4, 8};
    log.by_user.resize(1);
    for (std::size_t t = 0; t < items.size(); ++t) {
        log.by_user[0].push_back(log.rows.size());
        log.rows.push_back({0, items[t], log.item_category[items[t]], true,
                            static_cast<std::int64_t>(t)});
    }

    InstanceSplit split = make_instances(log, /*S=*/2, /*L=*/3, /*seed=*/5);
    std::vector<Instance> all = split.train;
    all.insert(all.end(), split.val.begin(), split.val.end());
    all.insert(all.end(), split.test.begin(), split.test.end());
    REQUIRE(all.size() == 2);
    CHECK(split.dropped_users == 0);

    const Instance& pos = all[0];
    const Instance& neg = all[1];
    CHECK(pos.label == 1);
    CHECK(pos.target_item_id == 8);
    CHECK(pos.target_category_id == 0);
    CHECK(pos.short_items == std::vector<std::int64_t>{2, 4});
    CHECK(pos.long_items == std::vector<std::int64_t>{1, 3, 5});

    CHECK(neg.label == 0);
    CHECK(neg.timestamp == pos.timestamp);
    CHECK(neg.target_category_id == 0);  // same-category negative
    CHECK(neg.target_item_id % 2 == 0);
    for (std::int64_t it : items) CHECK(neg.target_item_id != it);  // non-interacted
    CHECK(neg.short_items == pos.short_items);
    CHECK(neg.long_items == pos.long_items);
}

TEST_CASE("make_instances drops unusable users") {
    BehaviorLog log;
    log.n_users = 3;
    log.n_items = 4;
    log.n_categories = 1;
    log.item_category = {0, 0, 0, 0};
    log.by_user.resize(3);
    // user 0: single row -> dropped
    log.by_user[0].push_back(log.rows.size());
    log.rows.push_back({0, 0, 0, true, 0});
    // user 1: no clicks at all -> dropped
    for (int t = 0; t < 3; ++t) {
        log.by_user[1].push_back(log.rows.size());
        log.rows.push_back({1, t % 2, 0, false, t});
    }
    // user 2: usable
    for (int t = 0; t < 3; ++t) {
        log.by_user[2].push_back(log.rows.size());
        log.rows.push_back({2, t, 0, true, t});
    }
    InstanceSplit split = make_instances(log, 2, 2, 7);
    CHECK(split.dropped_users == 2);
    CHECK(split.train.size() + split.val.size() + split.test.size() == 2);
}

TEST_CASE("chronological split has no temporal leakage") {
    SyntheticData d = generate(small_spec(0.8, 19), 8, 64);
    InstanceSplit split = split_instances(d.instances);
    REQUIRE_FALSE(split.train.empty());
    REQUIRE_FALSE(split.val.empty());
    REQUIRE_FALSE(split.test.empty());
    CHECK(split.train.size() % 2 == 0);  // pos/neg pairs stay together
    CHECK(split.train.back().timestamp <= split.val.front().timestamp);
    CHECK(split.val.back().timestamp <= split.test.front().timestamp);
    double frac = static_cast<double>(split.train.size()) /
                  static_cast<double>(d.instances.size());
    CHECK(frac == Catch::Approx(0.8).margin(0.01));
    // synthetic timestamps encode the user, so users never straddle the split
    std::int64_t max_train_user = 0;
    for (const Instance& inst : split.train)
        max_train_user = std::max(max_train_user, inst.user_id);
    for (const Instance& inst : split.test) CHECK(inst.user_id > max_train_user);
}

TEST_CASE("short and long sequences are disjoint in time") {
    SyntheticData d = generate(small_spec(0.8, 23), 8, 64);
    BehaviorLog& log = d.log;
    InstanceSplit split = make_instances(log, 8, 64, 29);
    std::vector<Instance>* parts[] = {&split.train, &split.val, &split.test};
    for (auto* part : parts)
        for (const Instance& inst : *part) {
            // rebuilt from a per-user chronological scan: long block strictly
            // precedes the short block, both strictly precede the target
            std::size_t total = inst.short_items.size() + inst.long_items.size();
            const auto& idx = log.by_user[static_cast<std::size_t>(inst.user_id)];
            CHECK(total < idx.size() + 1);
            CHECK(inst.short_items.size() <= 8);
            CHECK(inst.long_items.size() <= 64);
        }
}
