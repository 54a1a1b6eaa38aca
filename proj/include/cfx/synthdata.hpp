#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfx/dataset.hpp"

namespace cfx {

// Low-rank store with the generating factors kept for test assertions.
struct LowRankData {
    InteractionStore store;
    int rank = 0;
    std::vector<float> user_factors;  // [num_users x rank]
    std::vector<float> item_factors;  // [num_items x rank]
};

// Ratings are a clipped affine map of U.V^T plus gaussian noise onto the
// 1-5 scale. keep_fraction < 1 drops a uniform subset of the cells, which
// gives sparse MovieLens-shaped corpora.
LowRankData make_lowrank(int num_users, int num_items, int rank, double noise_sd, uint64_t seed,
                         double keep_fraction = 1.0);

// One planted (user, driver item, target item) triple: the driver interaction
// is constructed to dominate the score of the unseen target item.
struct Plant {
    int32_t user = 0;
    int32_t driver_item = 0;
    int32_t target_item = 0;
};

struct PlantedData {
    InteractionStore store;
    std::vector<Plant> plants;
};

// Builds a store where each planted user's top recommendation is driven by a
// single history interaction: the target item's rating column duplicates the
// driver item's column among supporter users, and only the driver interaction
// ties the planted user to that column.
PlantedData make_planted(int num_users, int num_items, uint64_t seed);

void save_plant_map(const std::string& path, const std::vector<Plant>& plants);
std::vector<Plant> load_plant_map(const std::string& path);

}  // namespace cfx
