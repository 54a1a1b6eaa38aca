#include "cfx/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfx/errors.hpp"
#include "cfx/rng.hpp"

namespace cfx {

using json = nlohmann::ordered_json;

LowRankData make_lowrank(int num_users, int num_items, int rank, double noise_sd, uint64_t seed,
                         double keep_fraction) {
    if (rank < 1 || rank > std::min(num_users, num_items)) {
        fail(ErrorCode::InvalidArgument, "rank must be in [1, min(num_users, num_items)]");
    }
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
        fail(ErrorCode::InvalidArgument, "keep_fraction must be in (0,1]");
    }

    LowRankData data;
    data.rank = rank;
    Rng rng(derive_seed(seed, 0x10A7u));

    const size_t r = static_cast<size_t>(rank);
    data.user_factors.resize(static_cast<size_t>(num_users) * r);
    data.item_factors.resize(static_cast<size_t>(num_items) * r);
    // Factors in [0.5, 1.5] keep z/rank inside [0.25, 2.25], so the affine map
    // below lands on [1, 5] without clipping when noise is zero.
    for (float& f : data.user_factors) f = 0.5f + static_cast<float>(rng.next_double());
    for (float& f : data.item_factors) f = 0.5f + static_cast<float>(rng.next_double());

    std::vector<Interaction> rows;
    std::vector<bool> user_has_row(static_cast<size_t>(num_users), false);
    for (int32_t u = 0; u < num_users; ++u) {
        for (int32_t i = 0; i < num_items; ++i) {
            bool keep = keep_fraction >= 1.0 || rng.next_double() < keep_fraction;
            double noise = noise_sd > 0.0 ? rng.next_gaussian() * noise_sd : 0.0;
            if (!keep) continue;
            double z = 0.0;
            for (size_t k = 0; k < r; ++k) {
                z += static_cast<double>(data.user_factors[static_cast<size_t>(u) * r + k]) *
                     static_cast<double>(data.item_factors[static_cast<size_t>(i) * r + k]);
            }
            z /= static_cast<double>(rank);
            double rating = 1.0 + 2.0 * (z - 0.25) + noise;
            rating = std::clamp(rating, 1.0, 5.0);
            rows.push_back({u, i, static_cast<float>(rating)});
            user_has_row[static_cast<size_t>(u)] = true;
        }
    }
    // Sparse sampling may rarely zero out a user's history; keep one row so
    // every user has an anchor interaction.
    for (int32_t u = 0; u < num_users; ++u) {
        if (user_has_row[static_cast<size_t>(u)]) continue;
        int32_t i = u % num_items;
        rows.push_back({u, i, 3.0f});
    }

    data.store = InteractionStore(std::move(rows), num_users, num_items, 1.0f, 5.0f);
    return data;
}

PlantedData make_planted(int num_users, int num_items, uint64_t seed) {
    if (num_users < 8 || num_items < 10) {
        fail(ErrorCode::InvalidArgument, "make_planted needs num_users >= 8 and num_items >= 10");
    }
    (void)seed;  // The construction is deterministic; seed reserved for sizing jitter.

    // Layout: item 0 is a safe fallback rated by every supporter, items 1..4
    // are fillers everyone rates, then (driver, target) pairs.
    constexpr int32_t kSafeItem = 0;
    constexpr int kFillers = 4;
    const int max_pairs = (num_items - 1 - kFillers) / 2;
    int plant_count = std::min({num_users / 4, max_pairs, 10});
    if (plant_count < 1) {
        fail(ErrorCode::InvalidArgument, "not enough users/items to plant");
    }
    const int supporters = num_users - plant_count;
    const int group_size = supporters / plant_count;
    if (group_size < 2) {
        fail(ErrorCode::InvalidArgument, "need at least 2 supporters per plant");
    }

    PlantedData data;
    std::vector<Interaction> rows;

    auto driver_of = [&](int k) { return static_cast<int32_t>(1 + kFillers + 2 * k); };
    auto target_of = [&](int k) { return static_cast<int32_t>(2 + kFillers + 2 * k); };

    for (int k = 0; k < plant_count; ++k) {
        data.plants.push_back({static_cast<int32_t>(k), driver_of(k), target_of(k)});
    }

    // Planted users: the driver rated high plus low filler ratings. The
    // target column is never touched by the planted user.
    for (int k = 0; k < plant_count; ++k) {
        int32_t u = static_cast<int32_t>(k);
        rows.push_back({u, driver_of(k), 5.0f});
        for (int f = 0; f < kFillers; ++f) {
            rows.push_back({u, static_cast<int32_t>(1 + f), 2.0f});
        }
    }

    // Supporters: a shared baseline (safe item above filler level) plus one
    // plant group each; the driver and target columns are duplicates there.
    for (int s = 0; s < supporters; ++s) {
        int32_t u = static_cast<int32_t>(plant_count + s);
        int group = std::min(s / group_size, plant_count - 1);
        rows.push_back({u, kSafeItem, 4.2f});
        for (int f = 0; f < kFillers; ++f) {
            rows.push_back({u, static_cast<int32_t>(1 + f), 3.0f});
        }
        rows.push_back({u, driver_of(group), 4.0f});
        rows.push_back({u, target_of(group), 4.0f});
    }

    data.store = InteractionStore(std::move(rows), num_users, num_items, 1.0f, 5.0f);
    return data;
}

void save_plant_map(const std::string& path, const std::vector<Plant>& plants) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    json j = json::array();
    for (const Plant& p : plants) {
        j.push_back(json{{"user", p.user}, {"driver_item", p.driver_item}, {"target_item", p.target_item}});
    }
    out << j.dump(2) << '\n';
}

std::vector<Plant> load_plant_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
    std::vector<Plant> plants;
    for (const auto& entry : j) {
        plants.push_back({entry.at("user").get<int32_t>(), entry.at("driver_item").get<int32_t>(),
                          entry.at("target_item").get<int32_t>()});
    }
    return plants;
}

}  // namespace cfx
