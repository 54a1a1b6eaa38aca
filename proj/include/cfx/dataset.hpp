#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cfx {

// One rating triple. Ids are dense 0-based; ratings stay on the raw scale
// as read (normalization happens inside model scoring).
struct Interaction {
    int32_t user = 0;
    int32_t item = 0;
    float rating = 0.0f;
};

enum class DatasetFormat { MovielensTsv, TriplesCsv };

// Items to remove from one user's training history. An empty item list is
// the null deletion.
struct DeletionMask {
    int32_t user = -1;
    std::vector<int32_t> items;  // sorted, unique

    bool is_null() const { return items.empty(); }
};

// Immutable set of rating triples plus the entity counts that define the
// embedding table shapes. Counts and rating bounds survive splitting and
// masking, so a user masked down to zero rows keeps an embedding slot.
class InteractionStore {
public:
    InteractionStore() = default;
    InteractionStore(std::vector<Interaction> rows, int32_t num_users, int32_t num_items,
                     float rating_min, float rating_max);

    const std::vector<Interaction>& interactions() const { return rows_; }
    size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    int32_t num_users() const { return num_users_; }
    int32_t num_items() const { return num_items_; }
    float rating_min() const { return rating_min_; }
    float rating_max() const { return rating_max_; }

    // Items the user rated in this store, sorted ascending. Unknown or
    // out-of-range users yield an empty set.
    std::vector<int32_t> user_history(int32_t user) const;

    // Row indices of one user's interactions, in row order.
    const std::vector<int32_t>& user_rows(int32_t user) const;

    // Store with exactly the masked (user, item) rows removed; everything
    // else, including row order and counts, is preserved.
    InteractionStore masked_view(const DeletionMask& mask) const;

    // Row-level uniform split; |train| = round(train_fraction * size).
    std::pair<InteractionStore, InteractionStore> split(double train_fraction, uint64_t seed) const;

    uint64_t content_hash() const;

private:
    struct Trusted {};
    InteractionStore(Trusted, std::vector<Interaction> rows, int32_t num_users, int32_t num_items,
                     float rating_min, float rating_max);
    void build_user_index();

    std::vector<Interaction> rows_;
    std::vector<std::vector<int32_t>> rows_by_user_;
    int32_t num_users_ = 0;
    int32_t num_items_ = 0;
    float rating_min_ = 0.0f;
    float rating_max_ = 0.0f;
};

struct IngestResult {
    InteractionStore store;
    // Dense id -> original id, one entry per dense id.
    std::vector<int64_t> user_ids;
    std::vector<int64_t> item_ids;
};

// Reads rating triples, densifies ids to contiguous 0-based ranges in first
// appearance order and records the id maps. Duplicate (user, item) rows are
// rejected.
IngestResult load_interactions(const std::string& path, DatasetFormat format);

std::pair<InteractionStore, InteractionStore> split(const InteractionStore& store,
                                                    double train_fraction, uint64_t seed);

// "original_id,dense_id" per line.
void save_id_map(const std::string& path, const std::vector<int64_t>& original_ids);

// Dense triples-csv with a "user,item,rating" header.
void save_triples_csv(const std::string& path, const InteractionStore& store);

// Reads a dense triples file written by save_triples_csv without re-densifying;
// counts and bounds come from the caller (a data-dir meta file).
InteractionStore load_dense_triples(const std::string& path, int32_t num_users, int32_t num_items,
                                    float rating_min, float rating_max);

}  // namespace cfx
