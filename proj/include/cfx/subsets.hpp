#pragma once

#include <cstdint>
#include <vector>

namespace cfx {

// C(n, k), saturating at cap.
uint64_t binomial_capped(uint64_t n, uint64_t k, uint64_t cap);

// Advances idx to the lexicographically next k-combination of [0, n).
bool next_combination(std::vector<int>& idx, int n);

// Distinct size-`size` subsets of `pool` (sorted ascending inside each
// subset). When C(|pool|, size) <= count, all subsets are enumerated in
// lexicographic order; otherwise `count` subsets are sampled uniformly
// without replacement. Sampling is a deterministic stream, so a larger
// count with the same seed extends the smaller run's subsets.
std::vector<std::vector<int32_t>> distinct_subsets(const std::vector<int32_t>& pool, int count,
                                                   int size, uint64_t seed);

}  // namespace cfx
