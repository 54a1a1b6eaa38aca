#include <doctest.h>

#include <set>

#include "cfx/errors.hpp"
#include "cfx/subsets.hpp"

using namespace cfx;

TEST_SUITE("subsets") {

TEST_CASE("binomial") {
    CHECK(binomial_capped(3, 3, 1000) == 1);
    CHECK(binomial_capped(10, 3, 1000) == 120);
    CHECK(binomial_capped(5, 6, 1000) == 0);
    CHECK(binomial_capped(100, 50, 1000) == 1000);  // capped
}

TEST_CASE("enumeration covers C(3,3) = 1") {
    auto subsets = distinct_subsets({1, 2, 3}, 5, 3, 7);
    REQUIRE(subsets.size() == 1);
    CHECK(subsets[0] == std::vector<int32_t>{1, 2, 3});
}

TEST_CASE("enumeration is lexicographic") {
    auto subsets = distinct_subsets({3, 1, 2}, 10, 2, 7);
    REQUIRE(subsets.size() == 3);
    CHECK(subsets[0] == std::vector<int32_t>{1, 2});
    CHECK(subsets[1] == std::vector<int32_t>{1, 3});
    CHECK(subsets[2] == std::vector<int32_t>{2, 3});
}

TEST_CASE("sampling returns distinct sorted subsets") {
    std::vector<int32_t> pool;
    for (int32_t i = 0; i < 10; ++i) pool.push_back(i);
    auto subsets = distinct_subsets(pool, 50, 3, 42);
    CHECK(subsets.size() == 50);
    std::set<std::vector<int32_t>> seen;
    for (const auto& s : subsets) {
        CHECK(s.size() == 3);
        CHECK(std::is_sorted(s.begin(), s.end()));
        CHECK(seen.insert(s).second);
    }
}

TEST_CASE("same seed reproduces the list") {
    std::vector<int32_t> pool;
    for (int32_t i = 0; i < 12; ++i) pool.push_back(i * 3);
    auto a = distinct_subsets(pool, 30, 3, 9);
    auto b = distinct_subsets(pool, 30, 3, 9);
    CHECK(a == b);
}

TEST_CASE("larger count extends the smaller run") {
    std::vector<int32_t> pool;
    for (int32_t i = 0; i < 14; ++i) pool.push_back(i);
    auto small = distinct_subsets(pool, 20, 3, 5);
    auto large = distinct_subsets(pool, 60, 3, 5);
    REQUIRE(large.size() == 60);
    for (size_t k = 0; k < small.size(); ++k) CHECK(small[k] == large[k]);
}

TEST_CASE("pool smaller than size errors") {
    CHECK_THROWS_WITH_AS(distinct_subsets({1, 2}, 5, 3, 1), doctest::Contains("history-too-small"),
                         Error);
}

}  // TEST_SUITE
