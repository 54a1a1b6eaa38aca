#include "cfx/subsets.hpp"

#include <algorithm>
#include <set>

#include "cfx/errors.hpp"
#include "cfx/rng.hpp"

namespace cfx {

uint64_t binomial_capped(uint64_t n, uint64_t k, uint64_t cap) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    uint64_t result = 1;
    for (uint64_t j = 1; j <= k; ++j) {
        uint64_t factor = n - k + j;
        if (result > cap / factor) return cap;
        result = result * factor / j;
    }
    return std::min(result, cap);
}

bool next_combination(std::vector<int>& idx, int n) {
    int k = static_cast<int>(idx.size());
    for (int pos = k - 1; pos >= 0; --pos) {
        if (idx[pos] < n - k + pos) {
            ++idx[pos];
            for (int j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

std::vector<std::vector<int32_t>> distinct_subsets(const std::vector<int32_t>& pool, int count,
                                                   int size, uint64_t seed) {
    if (size < 1 || count < 1) {
        fail(ErrorCode::InvalidArgument, "distinct_subsets needs count >= 1 and size >= 1");
    }
    if (static_cast<size_t>(size) > pool.size()) {
        fail(ErrorCode::HistoryTooSmall, "pool has " + std::to_string(pool.size()) +
                                             " items, subset size is " + std::to_string(size));
    }
    std::vector<int32_t> sorted = pool;
    std::sort(sorted.begin(), sorted.end());

    const int n = static_cast<int>(sorted.size());
    const uint64_t total =
        binomial_capped(static_cast<uint64_t>(n), static_cast<uint64_t>(size), 1ULL << 62);
    std::vector<std::vector<int32_t>> subsets;

    if (total <= static_cast<uint64_t>(count)) {
        std::vector<int> idx(static_cast<size_t>(size));
        for (int j = 0; j < size; ++j) idx[static_cast<size_t>(j)] = j;
        do {
            std::vector<int32_t> subset(static_cast<size_t>(size));
            for (int j = 0; j < size; ++j) {
                subset[static_cast<size_t>(j)] = sorted[static_cast<size_t>(idx[static_cast<size_t>(j)])];
            }
            subsets.push_back(std::move(subset));
        } while (next_combination(idx, n));
        return subsets;
    }

    Rng rng(seed);
    std::set<std::vector<int32_t>> seen;
    std::vector<int32_t> scratch = sorted;
    subsets.reserve(static_cast<size_t>(count));
    while (subsets.size() < static_cast<size_t>(count)) {
        // Partial Fisher-Yates: a uniform size-`size` subset per draw.
        for (int j = 0; j < size; ++j) {
            size_t pick = static_cast<size_t>(j) +
                          static_cast<size_t>(rng.below(static_cast<uint64_t>(n - j)));
            std::swap(scratch[static_cast<size_t>(j)], scratch[pick]);
        }
        std::vector<int32_t> subset(scratch.begin(), scratch.begin() + size);
        std::sort(subset.begin(), subset.end());
        if (seen.insert(subset).second) subsets.push_back(std::move(subset));
    }
    return subsets;
}

}  // namespace cfx
