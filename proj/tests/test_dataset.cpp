#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cfx/dataset.hpp"
#include "cfx/errors.hpp"

using namespace cfx;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

InteractionStore tiny_store() {
    // "0,0,5 / 0,1,3 / 1,0,4"
    return InteractionStore({{0, 0, 5.0f}, {0, 1, 3.0f}, {1, 0, 4.0f}}, 2, 2, 3.0f, 5.0f);
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("triples csv ingest") {
    auto path = temp_file("cfx_triples.csv", "0,0,5\n0,1,3\n1,0,4\n");
    IngestResult result = load_interactions(path.string(), DatasetFormat::TriplesCsv);
    CHECK(result.store.num_users() == 2);
    CHECK(result.store.num_items() == 2);
    CHECK(result.store.size() == 3);
    CHECK(result.store.rating_min() == 3.0f);
    CHECK(result.store.rating_max() == 5.0f);
    fs::remove(path);
}

TEST_CASE("triples csv header and non-contiguous ids densify") {
    auto path = temp_file("cfx_triples_hdr.csv", "user,item,rating\n10,100,5\n10,200,3\n20,100,4\n");
    IngestResult result = load_interactions(path.string(), DatasetFormat::TriplesCsv);
    CHECK(result.store.num_users() == 2);
    CHECK(result.store.num_items() == 2);
    CHECK(result.user_ids == std::vector<int64_t>{10, 20});
    CHECK(result.item_ids == std::vector<int64_t>{100, 200});
    fs::remove(path);
}

TEST_CASE("movielens tsv ingest with timestamp") {
    auto path = temp_file("cfx_ml.tsv", "1\t10\t5\t881250949\n1\t20\t3\t881250950\n2\t10\t4\t881250951\n");
    IngestResult result = load_interactions(path.string(), DatasetFormat::MovielensTsv);
    CHECK(result.store.size() == 3);
    CHECK(result.store.num_users() == 2);
    fs::remove(path);
}

TEST_CASE("empty file is an empty-input error") {
    auto path = temp_file("cfx_empty.csv", "");
    CHECK_THROWS_WITH_AS(load_interactions(path.string(), DatasetFormat::TriplesCsv),
                         doctest::Contains("empty-input"), Error);
    fs::remove(path);
}

TEST_CASE("malformed row reports the line number") {
    auto path = temp_file("cfx_bad.csv", "0,0,5\n0,oops,3\n");
    try {
        load_interactions(path.string(), DatasetFormat::TriplesCsv);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("duplicate pair is rejected with its line") {
    auto path = temp_file("cfx_dup.csv", "0,0,5\n0,1,3\n0,0,4\n");
    try {
        load_interactions(path.string(), DatasetFormat::TriplesCsv);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("user_history") {
    InteractionStore store = tiny_store();
    CHECK(store.user_history(0) == std::vector<int32_t>{0, 1});
    CHECK(store.user_history(1) == std::vector<int32_t>{0});
    CHECK(store.user_history(99).empty());
}

TEST_CASE("masked_view removes exactly the masked rows") {
    InteractionStore store = tiny_store();
    InteractionStore masked = store.masked_view({0, {0}});
    CHECK(masked.size() == 2);
    CHECK(masked.num_users() == 2);
    CHECK(masked.user_history(0) == std::vector<int32_t>{1});
    CHECK(masked.user_history(1) == std::vector<int32_t>{0});

    SUBCASE("null deletion is the identity") {
        InteractionStore null_masked = store.masked_view({0, {}});
        CHECK(null_masked.size() == store.size());
        CHECK(null_masked.content_hash() == store.content_hash());
    }
    SUBCASE("full history deletion keeps the embedding slot") {
        InteractionStore bare = store.masked_view({0, {0, 1}});
        CHECK(bare.num_users() == 2);
        CHECK(bare.user_history(0).empty());
        CHECK(bare.size() == 1);
    }
    SUBCASE("item outside history is an invalid-mask error") {
        CHECK_THROWS_WITH_AS(store.masked_view({1, {1}}), doctest::Contains("invalid-mask"), Error);
    }
}

TEST_CASE("split partitions rows") {
    std::vector<Interaction> rows;
    for (int32_t u = 0; u < 10; ++u) {
        for (int32_t i = 0; i < 10; ++i) rows.push_back({u, i, static_cast<float>(1 + (u + i) % 5)});
    }
    InteractionStore store(rows, 10, 10, 1.0f, 5.0f);
    auto [train_store, test_store] = split(store, 0.7, 99);
    CHECK(train_store.size() == 70);
    CHECK(test_store.size() == 30);
    CHECK(train_store.num_users() == 10);
    CHECK(test_store.num_items() == 10);
    CHECK(train_store.size() + test_store.size() == store.size());

    SUBCASE("same seed gives identical splits") {
        auto [train2, test2] = split(store, 0.7, 99);
        CHECK(train2.content_hash() == train_store.content_hash());
        CHECK(test2.content_hash() == test_store.content_hash());
    }
    SUBCASE("different seed gives a different split") {
        auto [train2, test2] = split(store, 0.7, 100);
        CHECK(train2.content_hash() != train_store.content_hash());
    }
    SUBCASE("fraction 1.0 keeps everything in train") {
        auto [train2, test2] = split(store, 1.0, 99);
        CHECK(train2.size() == store.size());
        CHECK(test2.empty());
    }
    SUBCASE("no row is in both halves") {
        std::set<std::pair<int32_t, int32_t>> train_pairs;
        for (const Interaction& row : train_store.interactions()) {
            train_pairs.insert({row.user, row.item});
        }
        for (const Interaction& row : test_store.interactions()) {
            CHECK(train_pairs.count({row.user, row.item}) == 0);
        }
    }
}

TEST_CASE("split rejects bad fractions") {
    InteractionStore store = tiny_store();
    CHECK_THROWS_AS(split(store, 0.0, 1), Error);
    CHECK_THROWS_AS(split(store, 1.5, 1), Error);
}

TEST_CASE("dense triples round-trip") {
    InteractionStore store = tiny_store();
    fs::path path = fs::temp_directory_path() / "cfx_dense.csv";
    save_triples_csv(path.string(), store);
    InteractionStore loaded = load_dense_triples(path.string(), 2, 2, 3.0f, 5.0f);
    CHECK(loaded.content_hash() == store.content_hash());
    fs::remove(path);
}

TEST_CASE("id map format") {
    fs::path path = fs::temp_directory_path() / "cfx_idmap.csv";
    save_id_map(path.string(), {10, 20, 7});
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "original_id,dense_id");
    std::getline(in, line);
    CHECK(line == "10,0");
    std::getline(in, line);
    CHECK(line == "20,1");
    std::getline(in, line);
    CHECK(line == "7,2");
    fs::remove(path);
}

TEST_CASE("movielens-100k counts when the corpus is available") {
    const char* root = std::getenv("CFX_ML100K");
    std::string path = root ? std::string(root) : "data/ml-100k/u.data";
    if (!fs::exists(path)) return;  // corpus not shipped; see scripts/fetch_ml100k.sh
    IngestResult result = load_interactions(path, DatasetFormat::MovielensTsv);
    CHECK(result.store.num_users() == 943);
    CHECK(result.store.num_items() == 1682);
    CHECK(result.store.size() == 100000);
}

}  // TEST_SUITE
